#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdrift/free_group.hpp"
#include "hyperdrift/h2.hpp"
#include "hyperdrift/markov.hpp"

namespace hyperdrift::io {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string serialize_matrix(const h2::Matrix& m) {
  return format_double(m.a) + " " + format_double(m.b) + " " + format_double(m.c) + " " +
         format_double(m.d);
}

inline h2::Matrix parse_matrix(const std::string& text) {
  std::istringstream in(text);
  h2::Matrix m;
  if (!(in >> m.a >> m.b >> m.c >> m.d)) {
    throw std::invalid_argument("matrix needs four entries: " + text);
  }
  std::string rest;
  if (in >> rest) throw std::invalid_argument("matrix has trailing tokens: " + text);
  return m;
}

/// A Markov system on disk: "m k" header (k = free-group rank, 0 for the
/// plane), m stochastic rows, then m*m isometry tokens row-major.
struct SystemFile {
  MarkovKernel kernel;
  int rank = 0;
  std::vector<std::string> isometries;
};

inline SystemFile load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open system file: " + path);
  int m = 0;
  SystemFile sys;
  if (!(in >> m >> sys.rank) || m < 1 || sys.rank < 0) {
    throw std::runtime_error("system file needs an 'm k' header: " + path);
  }
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m),
                                        std::vector<double>(static_cast<std::size_t>(m)));
  for (auto& row : rows) {
    for (double& p : row) {
      if (!(in >> p)) throw std::runtime_error("system file truncated in kernel rows: " + path);
    }
  }
  sys.kernel = make_kernel(rows);
  in >> std::ws;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) sys.isometries.push_back(line);
  }
  if (sys.isometries.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(m)) {
    throw std::runtime_error("system file needs one isometry line per (state, state) pair: " +
                             path);
  }
  return sys;
}

namespace detail {

/// Writes through a temporary and renames, so a crash or a throwing writer
/// never leaves a half-written artifact at the destination.
template <class Fn>
void atomic_write(const std::string& path, Fn&& fill) {
  std::filesystem::path tmp = std::filesystem::path(path).concat(".tmp");
  try {
    {
      std::ofstream out(tmp);
      if (!out) throw std::runtime_error("cannot open output file: " + tmp.string());
      fill(out);
      out.flush();
      if (!out) throw std::runtime_error("failed writing output file: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

}  // namespace detail

inline void save_system(const std::string& path, const SystemFile& sys) {
  detail::atomic_write(path, [&](std::ofstream& out) {
    int m = sys.kernel.size();
    if (sys.isometries.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(m)) {
      throw std::invalid_argument("system has a wrong-sized isometry table");
    }
    out << m << " " << sys.rank << "\n";
    for (const auto& row : sys.kernel.rows) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        out << (j ? " " : "") << format_double(row[j]);
      }
      out << "\n";
    }
    for (const auto& token : sys.isometries) out << token << "\n";
  });
}

inline std::vector<fg::Word> tree_table(const SystemFile& sys) {
  if (sys.rank < 1) throw std::invalid_argument("system file does not describe a tree model");
  std::vector<fg::Word> table;
  table.reserve(sys.isometries.size());
  for (const auto& token : sys.isometries) table.push_back(fg::parse_word(token, sys.rank));
  return table;
}

inline std::vector<h2::Matrix> plane_table(const SystemFile& sys) {
  if (sys.rank != 0) throw std::invalid_argument("system file does not describe a plane model");
  std::vector<h2::Matrix> table;
  table.reserve(sys.isometries.size());
  for (const auto& token : sys.isometries) table.push_back(parse_matrix(token));
  return table;
}

inline SystemFile make_system_file(MarkovKernel kernel, const std::vector<fg::Word>& table,
                                   int rank) {
  SystemFile sys;
  sys.kernel = std::move(kernel);
  sys.rank = rank;
  for (const auto& w : table) sys.isometries.push_back(fg::to_string(w));
  return sys;
}

inline SystemFile make_system_file(MarkovKernel kernel, const std::vector<h2::Matrix>& table) {
  SystemFile sys;
  sys.kernel = std::move(kernel);
  sys.rank = 0;
  for (const auto& m : table) sys.isometries.push_back(serialize_matrix(m));
  return sys;
}

/// Tabular experiment output. Every file starts with '#' comment lines that
/// carry the resolved configuration, so a result can always be re-run.
struct OutputTable {
  std::vector<std::string> header;  // comment lines, emitted with a leading '# '
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline void check_table(const OutputTable& table) {
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw std::invalid_argument("output row width does not match the column list");
    }
  }
}

inline void write_csv(const std::string& path, const OutputTable& table) {
  check_table(table);
  detail::atomic_write(path, [&](std::ofstream& out) {
    for (const auto& line : table.header) out << "# " << line << "\n";
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      out << (j ? "," : "") << table.columns[j];
    }
    out << "\n";
    for (const auto& row : table.rows) {
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
      out << "\n";
    }
  });
}

/// The JSON flavour mirrors the CSV schema: the same header comments, then
/// one object per row. Numeric-looking cells become JSON numbers; anything
/// else (words, ends, "inf") stays a string.
inline void write_json(const std::string& path, const OutputTable& table) {
  check_table(table);
  detail::atomic_write(path, [&](std::ofstream& out) {
    for (const auto& line : table.header) out << "# " << line << "\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
      nlohmann::ordered_json obj;
      for (std::size_t j = 0; j < row.size(); ++j) {
        const std::string& cell = row[j];
        double value = 0.0;
        auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec == std::errc() && end == cell.data() + cell.size() && std::isfinite(value)) {
          obj[table.columns[j]] = value;
        } else {
          obj[table.columns[j]] = cell;
        }
      }
      rows.push_back(std::move(obj));
    }
    out << rows.dump(2) << "\n";
  });
}

inline void write_table(const std::string& path, const OutputTable& table, bool as_json) {
  if (as_json) {
    write_json(path, table);
  } else {
    write_csv(path, table);
  }
}

}  // namespace hyperdrift::io

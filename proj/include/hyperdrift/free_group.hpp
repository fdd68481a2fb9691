#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperdrift::fg {

/// Letters are signed generator ids: +g for the g-th generator, -g for its
/// inverse, with g in 1..rank. Words are kept freely reduced at all times.
using Letter = std::int16_t;

struct Word {
  std::vector<Letter> letters;
  int rank = 2;

  static Word identity(int rank) { return Word{{}, rank}; }
  bool empty() const { return letters.empty(); }
  std::size_t length() const { return letters.size(); }
  bool operator==(const Word& other) const {
    return rank == other.rank && letters == other.letters;
  }
};

inline void check_rank(int rank) {
  if (rank < 1 || rank > 26) throw std::invalid_argument("free group rank must be in 1..26");
}

inline void check_same_rank(const Word& u, const Word& v) {
  if (u.rank != v.rank) throw std::invalid_argument("free group rank mismatch");
}

inline void check_letter(Letter l, int rank) {
  int g = std::abs(static_cast<int>(l));
  if (g < 1 || g > rank) throw std::invalid_argument("letter outside generator range");
}

inline void push_reduced(std::vector<Letter>& out, Letter l) {
  if (!out.empty() && out.back() == static_cast<Letter>(-l)) {
    out.pop_back();
  } else {
    out.push_back(l);
  }
}

/// Builds a word from arbitrary letters, reducing as it goes.
inline Word make_word(const std::vector<Letter>& letters, int rank) {
  check_rank(rank);
  Word w;
  w.rank = rank;
  w.letters.reserve(letters.size());
  for (Letter l : letters) {
    check_letter(l, rank);
    push_reduced(w.letters, l);
  }
  return w;
}

inline Word mul(const Word& u, const Word& v) {
  check_same_rank(u, v);
  Word out = u;
  out.letters.reserve(u.length() + v.length());
  for (Letter l : v.letters) push_reduced(out.letters, l);
  return out;
}

inline Word inverse(const Word& u) {
  Word out;
  out.rank = u.rank;
  out.letters.reserve(u.length());
  for (auto it = u.letters.rbegin(); it != u.letters.rend(); ++it) {
    out.letters.push_back(static_cast<Letter>(-*it));
  }
  return out;
}

inline std::size_t common_prefix_length(const Word& u, const Word& v) {
  std::size_t n = std::min(u.length(), v.length());
  std::size_t i = 0;
  while (i < n && u.letters[i] == v.letters[i]) ++i;
  return i;
}

/// Word metric d(u, v) = |u^{-1} v|. The cancellation in u^{-1} v is exactly
/// the common prefix of u and v, so this never materialises the product.
inline long distance(const Word& u, const Word& v) {
  check_same_rank(u, v);
  std::size_t c = common_prefix_length(u, v);
  return static_cast<long>(u.length() + v.length() - 2 * c);
}

/// An end of the tree: the infinite reduced word prefix . period . period ...
/// An empty period marks an end known only to depth |prefix| (a truncated
/// representation; geometry on it is exact up to that depth).
struct End {
  Word prefix;
  Word period;
};

inline bool exactly_representable(const End& e) { return !e.period.empty(); }

inline Letter stream_letter(const End& e, std::size_t i) {
  if (i < e.prefix.length()) return e.prefix.letters[i];
  if (e.period.empty()) throw std::out_of_range("truncated end has no letters beyond its prefix");
  return e.period.letters[(i - e.prefix.length()) % e.period.length()];
}

inline std::size_t known_depth(const End& e) {
  return e.period.empty() ? e.prefix.length() : std::numeric_limits<std::size_t>::max();
}

namespace detail {

inline Word primitive_root(const Word& period) {
  std::size_t n = period.length();
  for (std::size_t d = 1; d <= n / 2; ++d) {
    if (n % d != 0) continue;
    bool repeats = true;
    for (std::size_t i = d; i < n && repeats; ++i) {
      repeats = period.letters[i] == period.letters[i % d];
    }
    if (repeats) {
      Word root;
      root.rank = period.rank;
      root.letters.assign(period.letters.begin(), period.letters.begin() + static_cast<long>(d));
      return root;
    }
  }
  return period;
}

inline void rotate_right(Word& w) {
  if (w.length() < 2) return;
  std::rotate(w.letters.rbegin(), w.letters.rbegin() + 1, w.letters.rend());
}

inline Word rotate_left(const Word& w, std::size_t t) {
  Word out = w;
  t %= w.length();
  std::rotate(out.letters.begin(), out.letters.begin() + static_cast<long>(t), out.letters.end());
  return out;
}

}  // namespace detail

/// Canonical form: primitive period, and no trailing prefix letter that could
/// be absorbed into a rotation of the period. Two representations of the same
/// end always canonicalise to identical (prefix, period) pairs.
inline End canonical(End e) {
  if (e.period.empty()) return e;
  e.period = detail::primitive_root(e.period);
  while (!e.prefix.empty() && e.prefix.letters.back() == e.period.letters.back()) {
    e.prefix.letters.pop_back();
    detail::rotate_right(e.period);
  }
  return e;
}

/// Builds an end and validates that the infinite word is freely reduced at
/// the prefix|period and period|period junctions.
inline End make_end(Word prefix, Word period) {
  if (!period.empty()) {
    check_same_rank(prefix, period);
    if (!prefix.empty() &&
        period.letters.front() == static_cast<Letter>(-prefix.letters.back())) {
      throw std::invalid_argument("end period cancels against its prefix");
    }
    if (period.letters.front() == static_cast<Letter>(-period.letters.back())) {
      throw std::invalid_argument("end period cancels against itself");
    }
  }
  return canonical(End{std::move(prefix), std::move(period)});
}

inline bool equal(const End& a, const End& b) {
  return a.prefix == b.prefix && a.period == b.period;
}

/// Common prefix length of two ends; -1 encodes an infinite agreement (equal
/// ends). Truncated ends compare over their known depth only.
inline long common_prefix_length(const End& a, const End& b) {
  if (exactly_representable(a) && exactly_representable(b) && equal(a, b)) return -1;
  std::size_t limit;
  if (!exactly_representable(a) || !exactly_representable(b)) {
    limit = std::min(known_depth(a), known_depth(b));
  } else {
    limit = std::max(a.prefix.length(), b.prefix.length()) +
            a.period.length() * b.period.length() + a.period.length() + b.period.length();
  }
  for (std::size_t i = 0; i < limit; ++i) {
    if (stream_letter(a, i) != stream_letter(b, i)) return static_cast<long>(i);
  }
  if (exactly_representable(a) && exactly_representable(b)) {
    throw std::logic_error("distinct canonical ends must differ within the scan window");
  }
  return static_cast<long>(limit);
}

/// Common prefix length of a finite word and an end.
inline long common_prefix_length(const Word& w, const End& e) {
  std::size_t limit = std::min(w.length(), known_depth(e));
  for (std::size_t i = 0; i < limit; ++i) {
    if (w.letters[i] != stream_letter(e, i)) return static_cast<long>(i);
  }
  return static_cast<long>(limit);
}

/// Left translation of an end: g . (prefix period^inf). Cancellation eats at
/// most |g| letters of the stream, after which the tail is a rotation of the
/// original period.
inline End act(const Word& g, const End& e) {
  check_same_rank(g, e.prefix);
  if (!exactly_representable(e)) {
    return make_end(mul(g, e.prefix), Word::identity(g.rank));
  }
  std::size_t gi = g.length();
  std::size_t consumed = 0;
  while (gi > 0 && g.letters[gi - 1] == static_cast<Letter>(-stream_letter(e, consumed))) {
    --gi;
    ++consumed;
  }
  Word head;
  head.rank = g.rank;
  head.letters.assign(g.letters.begin(), g.letters.begin() + static_cast<long>(gi));
  if (consumed <= e.prefix.length()) {
    head.letters.insert(head.letters.end(), e.prefix.letters.begin() + static_cast<long>(consumed),
                        e.prefix.letters.end());
    return canonical(End{std::move(head), e.period});
  }
  std::size_t t = (consumed - e.prefix.length()) % e.period.length();
  return canonical(End{std::move(head), detail::rotate_left(e.period, t)});
}

/// All reduced words of a given length, each extended to an end by repeating
/// its own last letter (the repeat never cancels, so the end is valid and its
/// first `depth` letters are exactly the word).
inline std::vector<End> boundary_net(int rank, int depth) {
  check_rank(rank);
  if (depth < 1) throw std::invalid_argument("net depth must be positive");
  std::vector<Word> frontier;
  for (int g = 1; g <= rank; ++g) {
    for (int s : {+1, -1}) {
      Word w;
      w.rank = rank;
      w.letters.push_back(static_cast<Letter>(s * g));
      frontier.push_back(std::move(w));
    }
  }
  for (int l = 1; l < depth; ++l) {
    std::vector<Word> next;
    next.reserve(frontier.size() * (2 * static_cast<std::size_t>(rank) - 1));
    for (const Word& w : frontier) {
      for (int g = 1; g <= rank; ++g) {
        for (int s : {+1, -1}) {
          auto l2 = static_cast<Letter>(s * g);
          if (l2 == static_cast<Letter>(-w.letters.back())) continue;
          Word w2 = w;
          w2.letters.push_back(l2);
          next.push_back(std::move(w2));
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<End> net;
  net.reserve(frontier.size());
  for (const Word& w : frontier) {
    Word period;
    period.rank = rank;
    period.letters.push_back(w.letters.back());
    net.push_back(make_end(w, period));
  }
  return net;
}

inline std::string letter_to_string(Letter l) {
  std::string s(1, static_cast<char>('a' + std::abs(static_cast<int>(l)) - 1));
  if (l < 0) s += '-';
  return s;
}

inline std::string to_string(const Word& w) {
  if (w.empty()) return "1";
  std::string out;
  for (std::size_t i = 0; i < w.length(); ++i) {
    if (i) out += ' ';
    out += letter_to_string(w.letters[i]);
  }
  return out;
}

inline std::string to_string(const End& e) {
  std::string out = to_string(e.prefix);
  if (exactly_representable(e)) {
    out += " ^ ";
    out += to_string(e.period);
  }
  return out;
}

/// Parses the token form "a b- a a". Inverses accept an ASCII '-' or the
/// superscript minus; "1" (or an empty string) is the identity.
inline Word parse_word(const std::string& text, int rank) {
  check_rank(rank);
  std::vector<Letter> letters;
  std::size_t i = 0;
  auto skip_space = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  skip_space();
  while (i < text.size()) {
    char c = text[i];
    if (c == '1' && letters.empty()) {
      ++i;
      skip_space();
      if (i >= text.size()) break;
      throw std::invalid_argument("unexpected tokens after identity word");
    }
    if (c < 'a' || c >= static_cast<char>('a' + rank)) {
      throw std::invalid_argument("unknown generator token in word: " + text);
    }
    Letter l = static_cast<Letter>(c - 'a' + 1);
    ++i;
    if (i < text.size() && text[i] == '-') {
      l = static_cast<Letter>(-l);
      ++i;
    } else if (i + 3 <= text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
               static_cast<unsigned char>(text[i + 1]) == 0x81 &&
               static_cast<unsigned char>(text[i + 2]) == 0xBB) {
      l = static_cast<Letter>(-l);
      i += 3;
    }
    letters.push_back(l);
    skip_space();
  }
  return make_word(letters, rank);
}

inline End parse_end(const std::string& text, int rank) {
  auto caret = text.find('^');
  if (caret == std::string::npos) {
    return make_end(parse_word(text, rank), Word::identity(rank));
  }
  return make_end(parse_word(text.substr(0, caret), rank),
                  parse_word(text.substr(caret + 1), rank));
}

}  // namespace hyperdrift::fg

#include "residual/rational.hpp"

#include <algorithm>
#include <cctype>

namespace residual {

namespace {

bool is_plain_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

Rational parse_rational(const std::string& text) {
  std::string s = text;
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  if (s.empty()) throw std::invalid_argument("parse_rational: empty string");

  if (auto slash = s.find('/'); slash != std::string::npos) {
    std::string num = s.substr(0, slash);
    std::string den = s.substr(slash + 1);
    if (!is_plain_integer(num) || !is_plain_integer(den))
      throw std::invalid_argument("parse_rational: malformed fraction '" + text + "'");
    BigInt d(den);
    if (d == 0) throw std::invalid_argument("parse_rational: zero denominator in '" + text + "'");
    return Rational(BigInt(num), d);
  }

  if (auto dot = s.find('.'); dot != std::string::npos) {
    std::string head = s.substr(0, dot);
    std::string frac = s.substr(dot + 1);
    bool neg = !head.empty() && head[0] == '-';
    if (!head.empty() && (head[0] == '+' || head[0] == '-')) head.erase(0, 1);
    if (head.empty()) head = "0";
    if (frac.empty()) frac = "0";
    if (!is_plain_integer(head) || !is_plain_integer(frac))
      throw std::invalid_argument("parse_rational: malformed decimal '" + text + "'");
    BigInt scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    BigInt value = BigInt(head) * scale + BigInt(frac);
    Rational q(value, scale);
    return neg ? Rational(-q) : q;
  }

  if (!is_plain_integer(s))
    throw std::invalid_argument("parse_rational: malformed number '" + text + "'");
  return Rational(BigInt(s));
}

std::string format_rational(const Rational& q) {
  if (denominator(q) == 1) return numerator(q).str();
  return numerator(q).str() + "/" + denominator(q).str();
}

}  // namespace residual

#include "prcm/rational.hpp"

#include <cctype>
#include <cmath>

namespace prcm {

namespace {

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

}  // namespace

Rat parse_rat(const std::string& input) {
  std::string s;
  for (char c : input)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw std::invalid_argument("parse_rat: empty string");

  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = (s[0] == '-');
    s.erase(0, 1);
  }

  Rat r;
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
    if (ip.empty()) ip = "0";
    if (!all_digits(ip) || (!fp.empty() && !all_digits(fp)))
      throw std::invalid_argument("parse_rat: bad decimal '" + input + "'");
    Int num(ip);
    Int den(1);
    for (char c : fp) {
      num = num * 10 + (c - '0');
      den *= 10;
    }
    r = Rat(num, den);
  } else {
    auto slash = s.find('/');
    if (slash != std::string::npos) {
      std::string ns = s.substr(0, slash), ds = s.substr(slash + 1);
      if (!all_digits(ns) || !all_digits(ds) || Int(ds) == 0)
        throw std::invalid_argument("parse_rat: bad rational '" + input + "'");
      r = Rat(Int(ns), Int(ds));
    } else {
      if (!all_digits(s))
        throw std::invalid_argument("parse_rat: bad integer '" + input + "'");
      r = Rat(Int(s));
    }
  }
  r.canonicalize();
  return neg ? Rat(-r) : r;
}

std::string rat_string(const Rat& r) {
  Rat c = r;
  c.canonicalize();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

double log_rat(const Rat& r) {
  if (sgn(r) <= 0) throw std::domain_error("log_rat: nonpositive argument");
  long en = 0, ed = 0;
  double mn = mpz_get_d_2exp(&en, r.get_num().get_mpz_t());
  double md = mpz_get_d_2exp(&ed, r.get_den().get_mpz_t());
  return std::log(mn) - std::log(md) +
         (static_cast<double>(en) - static_cast<double>(ed)) * M_LN2;
}

double rat_to_double(const Rat& r) { return mpq_get_d(r.get_mpq_t()); }

}  // namespace prcm

#pragma once

// Small text helpers shared by the file formats: shortest round-trip decimal
// rendering and strict number parsing.

#include <charconv>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <oac/model.hpp>

namespace oac::detail {

/// Shortest decimal that parses back to the same double ("inf" for infinity).
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), "format_double: conversion failed");
  return std::string(buf, ptr);
}

inline std::string format_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_double(xs[i]);
  }
  return out;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, const std::string& what) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);  // strtod accepts "inf" and "nan"
  if (end == begin || *end != '\0')
    throw std::invalid_argument(what + ": expected a number, got '" + s + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), what));
  if (out.empty()) throw std::invalid_argument(what + ": expected a comma separated list");
  return out;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  double v = parse_double(s, what);
  long long n = static_cast<long long>(v);
  if (static_cast<double>(n) != v) throw std::invalid_argument(what + ": expected an integer");
  return n;
}

}  // namespace oac::detail

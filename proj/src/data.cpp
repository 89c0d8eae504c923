/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "survfuse/error.hpp"

namespace survfuse {

FusedObservation FusedObservation::right_censored(std::vector<double> w, double y, int delta_r) {
  FusedObservation o;
  o.source = 1;
  o.w = std::move(w);
  o.y = y;
  o.delta_r = delta_r;
  return o;
}

FusedObservation FusedObservation::current_status(std::vector<double> w, double c, int delta_c) {
  FusedObservation o;
  o.source = 0;
  o.w = std::move(w);
  o.c = c;
  o.delta_c = delta_c;
  return o;
}

namespace {

std::string row_list(const std::vector<std::size_t>& rows) {
  std::ostringstream s;
  for (std::size_t i = 0; i < rows.size() && i < 20; ++i) s << (i ? ", " : "") << rows[i];
  if (rows.size() > 20) s << ", ... (" << rows.size() << " rows)";
  return s.str();
}

bool bad_indicator(int v) { return v != 0 && v != 1; }

}  // namespace

FusedSample::FusedSample(std::vector<FusedObservation> obs, std::optional<double> pi) : obs_(std::move(obs)) {
  if (obs_.empty()) fail(ErrorKind::kValidation, "sample is empty");
  dim_ = obs_.front().w.size();
  if (dim_ == 0) fail(ErrorKind::kValidation, "at least one covariate column is required");
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    const auto& o = obs_[i];
    bool ok = (o.source == 0 || o.source == 1) && o.w.size() == dim_;
    for (double v : o.w) ok = ok && std::isfinite(v);
    if (o.source == 1) ok = ok && std::isfinite(o.y) && o.y >= 0.0 && !bad_indicator(o.delta_r);
    if (o.source == 0) ok = ok && std::isfinite(o.c) && o.c >= 0.0 && !bad_indicator(o.delta_c);
    if (!ok) bad.push_back(i + 1);
    if (o.source == 1) ++n1_;
  }
  if (!bad.empty()) throw ValidationError("invalid observations at rows " + row_list(bad), bad);
  if (pi) {
    if (!(*pi > 0.0 && *pi <= 1.0)) fail(ErrorKind::kValidation, "design pi must lie in (0, 1]");
    pi_ = *pi;
    pi_design_ = true;
  } else {
    pi_ = static_cast<double>(n1_) / static_cast<double>(obs_.size());
  }
}

double FusedSample::max_time() const {
  double m = 0.0;
  for (const auto& o : obs_) m = std::max(m, o.source == 1 ? o.y : o.c);
  return m;
}

std::vector<double> FusedSample::inspection_times() const {
  std::vector<double> c;
  for (const auto& o : obs_)
    if (o.source == 0) c.push_back(o.c);
  return c;
}

double empirical_quantile(std::vector<double> v, double q) {
  if (v.empty()) fail(ErrorKind::kArgument, "quantile of empty set");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorKind::kArgument, "quantile level outside [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

InspectionWindow inspection_window(const FusedSample& sample, double lo_q, double hi_q) {
  const auto c = sample.inspection_times();
  if (c.empty()) fail(ErrorKind::kEmptySource, "no current-status rows: inspection window undefined");
  if (!(lo_q < hi_q)) fail(ErrorKind::kArgument, "trim quantiles must satisfy lo < hi");
  InspectionWindow w{empirical_quantile(c, lo_q), empirical_quantile(c, hi_q)};
  if (!(w.c_lower < w.c_upper))
    fail(ErrorKind::kValidation, "degenerate inspection window (c_l = c_u)");
  return w;
}

FusedSample restrict_to_window(const FusedSample& sample, const InspectionWindow& win, std::size_t* dropped) {
  std::vector<FusedObservation> kept;
  kept.reserve(sample.size());
  std::size_t k = 0;
  for (const auto& o : sample.observations()) {
    if (o.source == 0 && !win.contains(o.c)) {
      ++k;
      continue;
    }
    kept.push_back(o);
  }
  if (dropped) *dropped = k;
  if (k == 0) return sample;
  std::optional<double> pi;
  if (sample.pi_is_design()) pi = sample.pi();
  return FusedSample(std::move(kept), pi);
}

// ------------------------------------------------------------------ CSV

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(v);
}

bool parse_binary(const std::string& s, int& v) {
  double d;
  if (!parse_double(s, d) || (d != 0.0 && d != 1.0)) return false;
  v = static_cast<int>(d);
  return true;
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

}  // namespace

FusedSample parse_csv(const std::string& text, std::optional<double> pi) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kValidation, "missing CSV header row");
  const auto header = split_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* req : {"source", "y", "delta_r", "c", "delta_c"})
    if (!col.count(req)) fail(ErrorKind::kValidation, std::string("missing required column '") + req + "'");
  std::vector<std::size_t> wcols;
  for (std::size_t k = 1;; ++k) {
    auto it = col.find("w" + std::to_string(k));
    if (it == col.end()) break;
    wcols.push_back(it->second);
  }
  if (wcols.empty()) fail(ErrorKind::kValidation, "missing required column 'w1'");

  std::vector<FusedObservation> obs;
  std::vector<std::size_t> bad;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto f = split_line(line);
    if (f.size() != header.size()) {
      bad.push_back(row);
      continue;
    }
    FusedObservation o;
    bool ok = parse_binary(f[col["source"]], o.source);
    for (std::size_t k : wcols) {
      double v;
      ok = ok && parse_double(f[k], v);
      o.w.push_back(v);
    }
    const std::string& ys = f[col["y"]];
    const std::string& drs = f[col["delta_r"]];
    const std::string& cs = f[col["c"]];
    const std::string& dcs = f[col["delta_c"]];
    if (ok && o.source == 1) {
      ok = cs.empty() && dcs.empty() && parse_double(ys, o.y) && o.y >= 0.0 && parse_binary(drs, o.delta_r);
    } else if (ok) {
      ok = ys.empty() && drs.empty() && parse_double(cs, o.c) && o.c >= 0.0 && parse_binary(dcs, o.delta_c);
    }
    if (!ok) {
      bad.push_back(row);
      continue;
    }
    obs.push_back(std::move(o));
  }
  if (!bad.empty()) throw ValidationError("invalid CSV rows " + row_list(bad), bad);
  return FusedSample(std::move(obs), pi);
}

FusedSample read_csv(const std::string& path, std::optional<double> pi) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_csv(s.str(), pi);
}

std::string to_csv(const FusedSample& sample) {
  std::string out = "source";
  for (std::size_t k = 1; k <= sample.dim(); ++k) out += ",w" + std::to_string(k);
  out += ",y,delta_r,c,delta_c\n";
  for (const auto& o : sample.observations()) {
    out += o.source == 1 ? "1" : "0";
    for (double v : o.w) {
      out += ',';
      append_double(out, v);
    }
    out += ',';
    if (o.source == 1) {
      append_double(out, o.y);
      out += o.delta_r ? ",1,," : ",0,,";
    } else {
      out += ",,";
      append_double(out, o.c);
      out += o.delta_c ? ",1" : ",0";
    }
    out += '\n';
  }
  return out;
}

void write_csv(const FusedSample& sample, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  out << to_csv(sample);
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

}  // namespace survfuse

// Copyright (c) 2026 The stylevc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stylevc/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace stylevc {

namespace {

Scalar rate(long long count, long long ref_len) {
  return ref_len > 0 ? 100.0 * static_cast<Scalar>(count) / static_cast<Scalar>(ref_len) : 0.0;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(text);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<Scalar> resample_linear(const std::vector<Scalar>& x, std::size_t n) {
  if (x.size() == n) return x;
  std::vector<Scalar> out(n);
  const Scalar scale = static_cast<Scalar>(x.size() - 1) / static_cast<Scalar>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar pos = static_cast<Scalar>(i) * scale;
    const auto lo = std::min(static_cast<std::size_t>(pos), x.size() - 1);
    const auto hi = std::min(lo + 1, x.size() - 1);
    const Scalar frac = pos - static_cast<Scalar>(lo);
    out[i] = x[lo] + frac * (x[hi] - x[lo]);
  }
  return out;
}

}  // namespace

Scalar PerResult::sub_rate() const { return rate(sub, ref_len); }
Scalar PerResult::del_rate() const { return rate(del, ref_len); }
Scalar PerResult::ins_rate() const { return rate(ins, ref_len); }
Scalar PerResult::per() const { return rate(sub + del + ins, ref_len); }

PerResult compute_per(const std::vector<int>& hyp, const std::vector<int>& ref) {
  if (ref.empty()) throw Error(ErrorCode::kInvalidInput, "PER needs a non-empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  // d(i, j): cost of aligning ref[:i] with hyp[:j].
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  PerResult r;
  r.ref_len = static_cast<long long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool match = ref[i - 1] == hyp[j - 1];
      if (d[i][j] == d[i - 1][j - 1] + (match ? 0 : 1)) {
        if (!match) ++r.sub;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++r.del;
      --i;
    } else {
      ++r.ins;
      --j;
    }
  }
  return r;
}

PerResult compute_per(const PhonemeSequence& hyp, const PhonemeSequence& ref) {
  return compute_per(hyp.tokens, ref.tokens);
}

PerResult compute_per(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  std::map<std::string, int> ids;
  auto intern = [&ids](const std::vector<std::string>& seq) {
    std::vector<int> out;
    out.reserve(seq.size());
    for (const auto& s : seq) out.push_back(ids.emplace(s, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const auto r = intern(ref);
  return compute_per(intern(hyp), r);
}

std::vector<PerRow> per_rows(const std::map<std::string, std::vector<std::string>>& hyp,
                             const std::map<std::string, std::vector<std::string>>& ref, PerResult* pooled) {
  std::vector<std::string> missing_hyp, missing_ref;
  for (const auto& [id, seq] : ref) {
    if (!hyp.count(id)) missing_hyp.push_back(id);
  }
  for (const auto& [id, seq] : hyp) {
    if (!ref.count(id)) missing_ref.push_back(id);
  }
  if (!missing_hyp.empty() || !missing_ref.empty()) {
    std::string msg = "hypothesis and reference ids differ;";
    auto list = [&msg](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" missing from ") + what + ":";
      for (const auto& id : ids) msg += " " + id;
      msg += ";";
    };
    list("hypotheses", missing_hyp);
    list("references", missing_ref);
    msg.pop_back();
    throw Error(ErrorCode::kInvalidInput, msg);
  }
  if (ref.empty()) throw Error(ErrorCode::kInvalidInput, "no utterances to score");
  std::vector<PerRow> rows;
  PerResult total;
  for (const auto& [id, seq] : ref) {
    PerRow row{id, compute_per(hyp.at(id), seq)};
    total.sub += row.counts.sub;
    total.del += row.counts.del;
    total.ins += row.counts.ins;
    total.ref_len += row.counts.ref_len;
    rows.push_back(row);
  }
  if (pooled) *pooled = total;
  return rows;
}

PerResult corpus_per(const std::map<std::string, std::vector<std::string>>& hyp,
                     const std::map<std::string, std::vector<std::string>>& ref) {
  PerResult pooled;
  per_rows(hyp, ref, &pooled);
  return pooled;
}

void write_per_csv(const std::string& path, const std::vector<PerRow>& rows) {
  auto out = open_out(path);
  out << "id,sub,del,ins,ref_len\n";
  for (const auto& r : rows) {
    out << r.id << ',' << r.counts.sub << ',' << r.counts.del << ',' << r.counts.ins << ',' << r.counts.ref_len
        << '\n';
  }
}

std::vector<PerRow> read_per_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<PerRow> rows;
  bool header = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("id,", 0) == 0) continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 5) throw Error(ErrorCode::kInvalidInput, path + ": expected 5 fields in '" + line + "'");
    PerRow row;
    row.id = f[0];
    try {
      row.counts.sub = std::stoll(f[1]);
      row.counts.del = std::stoll(f[2]);
      row.counts.ins = std::stoll(f[3]);
      row.counts.ref_len = std::stoll(f[4]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidInput, path + ": bad count in '" + line + "'");
    }
    rows.push_back(row);
  }
  return rows;
}

std::map<std::string, std::vector<std::string>> read_transcripts(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (header) {
      header = false;
      if (line.rfind("id,", 0) == 0) continue;
    }
    if (comma == std::string::npos) throw Error(ErrorCode::kInvalidInput, path + ": expected id,phonemes in '" + line + "'");
    const std::string id = trim(line.substr(0, comma));
    if (!out.emplace(id, split_ws(line.substr(comma + 1))).second) {
      throw Error(ErrorCode::kInvalidInput, path + ": duplicate id " + id);
    }
  }
  return out;
}

void write_transcripts(const std::string& path, const std::map<std::string, std::vector<std::string>>& transcripts) {
  auto out = open_out(path);
  out << "id,phonemes\n";
  for (const auto& [id, seq] : transcripts) {
    out << id << ',';
    for (std::size_t i = 0; i < seq.size(); ++i) out << (i ? " " : "") << seq[i];
    out << '\n';
  }
}

void plot_f0_overlay(const std::vector<NamedContour>& contours, const std::string& svg_path,
                     const std::string& csv_path) {
  if (contours.empty()) throw Error(ErrorCode::kInvalidInput, "nothing to plot");
  Scalar t_max = 0.0, f_min = std::numeric_limits<Scalar>::infinity(), f_max = 0.0;
  for (const auto& c : contours) {
    if (c.contour.size() == 0) throw Error(ErrorCode::kInvalidInput, "contour '" + c.label + "' is empty");
    if (!c.contour.fully_voiced()) {
      throw Error(ErrorCode::kInvalidInput, "contour '" + c.label + "' has unvoiced frames; interpolate it first");
    }
    t_max = std::max(t_max, (c.contour.size() - 1) * c.contour.frame_shift_ms / 1000.0);
    for (Scalar v : c.contour.values) {
      f_min = std::min(f_min, v);
      f_max = std::max(f_max, v);
    }
  }
  if (t_max <= 0) t_max = 1.0;
  if (f_max - f_min < 1.0) {
    f_min -= 5.0;
    f_max += 5.0;
  }

  auto csv = open_out(csv_path);
  csv << "label,frame,time_s,f0_hz\n";
  char buf[96];
  for (const auto& c : contours) {
    for (std::size_t t = 0; t < c.contour.size(); ++t) {
      std::snprintf(buf, sizeof(buf), ",%zu,%.6f,%.6f\n", t, t * c.contour.frame_shift_ms / 1000.0,
                    c.contour.values[t]);
      csv << c.label << buf;
    }
  }

  constexpr Scalar kWidth = 800, kHeight = 400, kLeft = 70, kRight = 160, kTop = 30, kBottom = 50;
  const Scalar pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto x_of = [&](Scalar t) { return kLeft + pw * t / t_max; };
  auto y_of = [&](Scalar f) { return kTop + ph * (1.0 - (f - f_min) / (f_max - f_min)); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  auto svg = open_out(svg_path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph << "\"/></g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int k = 0; k <= 4; ++k) {
    const Scalar t = t_max * k / 4.0, f = f_min + (f_max - f_min) * k / 4.0;
    std::snprintf(buf, sizeof(buf), "%.2f", t);
    svg << "<text x=\"" << x_of(t) << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">" << buf
        << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.0f", f);
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y_of(f) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">Time (s)</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">F0 (Hz)</text>\n";
  svg << "</g>\n";
  for (std::size_t k = 0; k < contours.size(); ++k) {
    const auto& c = contours[k].contour;
    const char* color = kColors[k % 6];
    svg << "<polyline class=\"f0\" data-label=\"" << xml_escape(contours[k].label) << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < c.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", t ? " " : "", x_of(t * c.frame_shift_ms / 1000.0),
                    y_of(c.values[t]));
      svg << buf;
    }
    svg << "\"/>\n";
    const Scalar ly = kTop + 14 + 18 * static_cast<Scalar>(k);
    svg << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text font-family=\"sans-serif\" font-size=\"12\" x=\"" << kWidth - kRight + 36 << "\" y=\"" << ly + 4
        << "\">" << xml_escape(contours[k].label) << "</text>\n";
  }
  svg << "</svg>\n";
}

std::vector<NamedContour> read_f0_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<NamedContour> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw Error(ErrorCode::kInvalidInput, path + ": malformed row '" + line + "'");
    if (out.empty() || out.back().label != f[0]) out.push_back({f[0], {}});
    auto& c = out.back().contour;
    c.values.push_back(std::stod(f[3]));
    c.voiced.push_back(true);
    if (c.values.size() == 2) c.frame_shift_ms = std::stod(f[2]) * 1000.0;
  }
  return out;
}

F0Similarity f0_similarity(const F0Contour& a, const F0Contour& b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::kInvalidInput, "F0 similarity needs at least 2 frames");
  if (!a.fully_voiced() || !b.fully_voiced()) {
    throw Error(ErrorCode::kInvalidInput, "F0 similarity needs interpolated contours");
  }
  const std::size_t n = std::min(a.size(), b.size());
  const auto x = resample_linear(a.values, n);
  const auto y = resample_linear(b.values, n);
  Scalar mx = 0, my = 0, se = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
    se += (x[i] - y[i]) * (x[i] - y[i]);
  }
  mx /= static_cast<Scalar>(n);
  my /= static_cast<Scalar>(n);
  Scalar sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  F0Similarity s;
  s.rmse_hz = std::sqrt(se / static_cast<Scalar>(n));
  if (sxx == 0.0 && syy == 0.0) {
    s.correlation = 1.0;
  } else if (sxx == 0.0 || syy == 0.0) {
    s.correlation = 0.0;
  } else {
    s.correlation = sxy / std::sqrt(sxx * syy);
  }
  return s;
}

PreferenceSummary aggregate_preferences(const std::vector<AttributedChoice>& responses,
                                        const std::vector<std::string>& systems) {
  if (responses.empty()) throw Error(ErrorCode::kInvalidInput, "no responses to aggregate");
  PreferenceSummary s;
  s.test_id = responses.front().test_id;
  for (const auto& sys : systems) {
    if (sys != kNoPreference && std::find(s.options.begin(), s.options.end(), sys) == s.options.end()) {
      s.options.push_back(sys);
    }
  }
  for (const auto& r : responses) {
    if (r.test_id != s.test_id) {
      throw Error(ErrorCode::kInvalidInput,
                  "responses come from different tests: " + s.test_id + " and " + r.test_id);
    }
    if (r.option != kNoPreference && std::find(s.options.begin(), s.options.end(), r.option) == s.options.end()) {
      s.options.push_back(r.option);
    }
    ++s.counts[r.option];
  }
  s.options.push_back(kNoPreference);
  s.trials = static_cast<long long>(responses.size());
  for (const auto& opt : s.options) {
    s.counts.emplace(opt, 0);
    s.percentages[opt] = 100.0 * static_cast<Scalar>(s.counts[opt]) / static_cast<Scalar>(s.trials);
  }
  return s;
}

void write_preference_csv(const std::string& path, const PreferenceSummary& summary) {
  auto out = open_out(path);
  out << "option,count,pct\n";
  char buf[32];
  for (const auto& opt : summary.options) {
    std::snprintf(buf, sizeof(buf), "%.1f", summary.percentages.at(opt));
    out << opt << ',' << summary.counts.at(opt) << ',' << buf << '\n';
  }
}

}  // namespace stylevc

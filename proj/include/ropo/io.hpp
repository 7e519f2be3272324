#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropo/harness.hpp"
#include "ropo/noise.hpp"
#include "ropo/prefmodel.hpp"
#include "ropo/trainer.hpp"

// Line-delimited text formats. All files are comma-separated with a header
// row; doubles round-trip through %.17g. Formats:
//   world    query,response,reward
//   policy   query,response,logit
//   dataset  query,y1,y2,label,clean_label,flipped   (+ "# eta=..." comment)
//   trace    step,risk,grad_norm,margin_0,...
//   results  one column per SweepResult field, empty cell = absent
//   long     kind,eta,seed,metric,value (plot-ready)

namespace ropo::io {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) {
    throw std::invalid_argument("bad number: " + s);
  }
  return v;
}

inline long parse_long(const std::string& s) {
  std::size_t pos = 0;
  const long v = std::stol(s, &pos);
  if (pos != s.size()) {
    throw std::invalid_argument("bad integer: " + s);
  }
  return v;
}

// ---- world / policy ----

inline void write_world(std::ostream& os, const World& w) {
  os << "query,response,reward\n";
  for (QueryId q : w.queries()) {
    for (ResponseId y : w.responses(q)) {
      os << q << ',' << y << ',' << fmt(w.latent_reward(q, y)) << '\n';
    }
  }
}

inline void write_policy(std::ostream& os, const Policy& p) {
  os << "query,response,logit\n";
  for (QueryId q : p.queries()) {
    for (ResponseId y : p.responses(q)) {
      os << q << ',' << y << ',' << fmt(p.logit(q, y)) << '\n';
    }
  }
}

namespace detail {

struct Triples {
  std::vector<QueryId> queries;
  std::vector<std::vector<ResponseId>> responses;
  std::vector<double> values;
};

inline Triples read_triples(std::istream& is, const std::string& expect_header) {
  std::string line;
  if (!std::getline(is, line) || split_csv(line) != split_csv(expect_header)) {
    throw std::runtime_error("expected header '" + expect_header + "'");
  }
  Triples t;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 3) {
      throw std::runtime_error("expected 3 fields: " + line);
    }
    const auto q = static_cast<QueryId>(parse_long(f[0]));
    const auto y = static_cast<ResponseId>(parse_long(f[1]));
    if (t.queries.empty() || t.queries.back() != q) {
      t.queries.push_back(q);
      t.responses.emplace_back();
    }
    t.responses.back().push_back(y);
    t.values.push_back(parse_double(f[2]));
  }
  return t;
}

}  // namespace detail

inline World read_world(std::istream& is) {
  auto t = detail::read_triples(is, "query,response,reward");
  return World(std::move(t.queries), std::move(t.responses),
               std::move(t.values));
}

inline Policy read_policy(std::istream& is) {
  auto t = detail::read_triples(is, "query,response,logit");
  return Policy(std::move(t.queries), std::move(t.responses),
                std::move(t.values));
}

// ---- dataset ----

inline void write_dataset(std::ostream& os, const NoisyDataset& d) {
  os << "# eta=" << fmt(d.eta) << '\n';
  os << "query,y1,y2,label,clean_label,flipped\n";
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    os << s.query << ',' << s.y1 << ',' << s.y2 << ',' << s.label << ','
       << d.clean_labels[i] << ',' << (d.flip_mask[i] ? 1 : 0) << '\n';
  }
}

/// Wraps a clean dataset (no flips) for serialization.
inline NoisyDataset as_noisy(std::vector<PreferenceSample> samples) {
  NoisyDataset d;
  d.eta = 0.0;
  d.clean_labels.reserve(samples.size());
  for (const auto& s : samples) {
    d.clean_labels.push_back(s.label);
  }
  d.flip_mask.assign(samples.size(), false);
  d.samples = std::move(samples);
  return d;
}

inline NoisyDataset read_dataset(std::istream& is) {
  NoisyDataset d;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) {
      continue;
    }
    if (line.rfind("# eta=", 0) == 0) {
      d.eta = parse_double(line.substr(6));
      continue;
    }
    if (line[0] == '#') {
      continue;
    }
    if (!header_seen) {
      if (line != "query,y1,y2,label,clean_label,flipped") {
        throw std::runtime_error("bad dataset header: " + line);
      }
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 6) {
      throw std::runtime_error("expected 6 fields: " + line);
    }
    PreferenceSample s{static_cast<QueryId>(parse_long(f[0])),
                       static_cast<ResponseId>(parse_long(f[1])),
                       static_cast<ResponseId>(parse_long(f[2])),
                       static_cast<int>(parse_long(f[3]))};
    d.samples.push_back(s);
    d.clean_labels.push_back(static_cast<int>(parse_long(f[4])));
    d.flip_mask.push_back(parse_long(f[5]) != 0);
  }
  if (!header_seen) {
    throw std::runtime_error("empty dataset file");
  }
  if (!d.consistent()) {
    throw std::runtime_error("dataset file fails flip-mask consistency");
  }
  return d;
}

// ---- training trace ----

inline void write_trace(std::ostream& os, const TrainTrace& trace) {
  std::size_t n_margins = 0;
  for (const auto& s : trace.steps) {
    n_margins = std::max(n_margins, s.margins.size());
  }
  os << "step,risk,grad_norm";
  for (std::size_t i = 0; i < n_margins; ++i) {
    os << ",margin_" << i;
  }
  os << '\n';
  for (const auto& s : trace.steps) {
    os << s.step << ',' << fmt(s.risk) << ',' << fmt(s.grad_norm);
    for (double m : s.margins) {
      os << ',' << fmt(m);
    }
    os << '\n';
  }
  os << "# converged=" << (trace.converged ? 1 : 0)
     << " aborted=" << (trace.aborted ? 1 : 0)
     << " steps_taken=" << trace.steps_taken << '\n';
  if (trace.aborted) {
    os << "# diagnostic=" << trace.diagnostic << '\n';
  }
}

// ---- sweep results ----

inline constexpr const char* kResultsHeader =
    "kind,eta,seed,accuracy,win_rate_vs_reference,mean_margin_clean,"
    "mean_margin_noisy,steps_to_converge,status";

inline void write_results_header(std::ostream& os) {
  os << kResultsHeader << '\n';
}

inline void write_result_row(std::ostream& os, const SweepResult& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt(*v) : std::string();
  };
  std::string status = r.status;
  for (char& c : status) {
    if (c == ',' || c == '\n') {
      c = ';';
    }
  }
  os << to_string(r.kind) << ',' << fmt(r.eta) << ',' << r.seed << ','
     << fmt(r.accuracy) << ',' << fmt(r.win_rate_vs_reference) << ','
     << opt(r.mean_margin_clean) << ',' << opt(r.mean_margin_noisy) << ','
     << r.steps_to_converge << ',' << status << '\n';
}

inline std::vector<SweepResult> read_results(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) {
    throw std::runtime_error("bad results header");
  }
  std::vector<SweepResult> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 9) {
      throw std::runtime_error("expected 9 fields: " + line);
    }
    SweepResult r;
    r.kind = loss_kind_from_string(f[0]);
    r.eta = parse_double(f[1]);
    r.seed = static_cast<std::uint64_t>(parse_long(f[2]));
    r.accuracy = parse_double(f[3]);
    r.win_rate_vs_reference = parse_double(f[4]);
    if (!f[5].empty()) {
      r.mean_margin_clean = parse_double(f[5]);
    }
    if (!f[6].empty()) {
      r.mean_margin_noisy = parse_double(f[6]);
    }
    r.steps_to_converge = static_cast<int>(parse_long(f[7]));
    r.status = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Plot-ready long format: one (metric, value) row per result field.
inline void write_long_format(std::ostream& os,
                              const std::vector<SweepResult>& rows) {
  os << "kind,eta,seed,metric,value\n";
  for (const auto& r : rows) {
    auto emit = [&](const char* metric, double v) {
      os << to_string(r.kind) << ',' << fmt(r.eta) << ',' << r.seed << ','
         << metric << ',' << fmt(v) << '\n';
    };
    emit("accuracy", r.accuracy);
    emit("win_rate_vs_reference", r.win_rate_vs_reference);
    if (r.mean_margin_clean) {
      emit("mean_margin_clean", *r.mean_margin_clean);
    }
    if (r.mean_margin_noisy) {
      emit("mean_margin_noisy", *r.mean_margin_noisy);
    }
    emit("steps_to_converge", static_cast<double>(r.steps_to_converge));
  }
}

// ---- file helpers ----

inline void save(const std::string& path,
                 const std::function<void(std::ostream&)>& writer) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  writer(os);
  if (!os) {
    throw std::runtime_error("write failed: " + path);
  }
}

template <typename T>
T load(const std::string& path, T (*reader)(std::istream&)) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open: " + path);
  }
  return reader(is);
}

}  // namespace ropo::io

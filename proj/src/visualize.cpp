// Copyright 2026 The ema-gestures Authors.
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

#include "gestures/visualize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gestures/errors.hpp"
#include "gestures/evaluation.hpp"

namespace gestures {
namespace {

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, ptr);
}

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Sequential white-to-dark-blue ramp.
std::string ramp(double x) {
  x = std::clamp(x, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - 247 * x));
  const int g = static_cast<int>(std::lround(255 - 207 * x));
  const int b = static_cast<int>(std::lround(255 - 148 * x));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

const char* kCoilColors[] = {"#d62728", "#ff7f0e", "#2ca02c", "#1f77b4", "#9467bd", "#8c564b"};

void write_text(const std::filesystem::path& path, const std::string& text, VizFiles& files) {
  std::ofstream os(path);
  if (!os) throw DataError(path.string() + ": cannot write");
  os << text;
  files.written.push_back(path);
}

struct Frame {
  double x0, y0, w, h;
  double lo_x, hi_x, lo_y, hi_y;
  double px(double x) const { return x0 + (x - lo_x) / (hi_x - lo_x) * w; }
  double py(double y) const { return y0 + h - (y - lo_y) / (hi_y - lo_y) * h; }
};

}  // namespace

std::vector<AlignmentSpan> read_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open alignment");
  std::vector<AlignmentSpan> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    AlignmentSpan s;
    if (!(ls >> s.start)) continue;
    if (!(ls >> s.end >> s.label) || s.end < s.start)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'start end label'");
    out.push_back(s);
  }
  return out;
}

void write_heatmap_csv(const std::filesystem::path& path, const Tensor& H) {
  require_rank(H, 2, "write_heatmap_csv");
  std::ofstream os(path);
  if (!os) throw DataError(path.string() + ": cannot write");
  for (Index d = 0; d < H.dim(0); ++d) {
    for (Index t = 0; t < H.dim(1); ++t) os << (t ? "," : "") << shortest(H(d, t));
    os << '\n';
  }
}

Tensor read_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw DataError(path.string() + ": malformed value");
      row.push_back(v);
      p = ptr < end && *ptr == ',' ? ptr + 1 : ptr;
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError(path.string() + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty heatmap");
  Tensor H({static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size())});
  for (std::size_t d = 0; d < rows.size(); ++d)
    for (std::size_t t = 0; t < rows[d].size(); ++t) H(static_cast<Index>(d), static_cast<Index>(t)) = rows[d][t];
  return H;
}

std::string heatmap_svg(const Tensor& H, double sample_rate, const std::vector<AlignmentSpan>& alignment) {
  require_rank(H, 2, "heatmap_svg");
  const Index D = H.dim(0), T = H.dim(1);
  const double cell_w = std::clamp(900.0 / static_cast<double>(T), 0.5, 8.0);
  const double cell_h = std::clamp(400.0 / static_cast<double>(D), 4.0, 16.0);
  const double left = 50, top = alignment.empty() ? 20 : 40, width = cell_w * T, height = cell_h * D;
  const double peak = std::max(H.data().maxCoeff(), 1e-300);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(left + width + 20) << "\" height=\""
     << num(top + height + 45) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(width) << "\" height=\""
     << num(height) << "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
  for (Index d = 0; d < D; ++d)
    for (Index t = 0; t < T; ++t) {
      const double v = H(d, t);
      if (v <= 0.0) continue;
      os << "<rect x=\"" << num(left + t * cell_w) << "\" y=\"" << num(top + d * cell_h) << "\" width=\""
         << num(cell_w) << "\" height=\"" << num(cell_h) << "\" fill=\"" << ramp(v / peak) << "\"/>\n";
    }
  const Index label_every = std::max<Index>(1, D / 10);
  for (Index d = 0; d < D; d += label_every)
    os << "<text x=\"" << num(left - 4) << "\" y=\"" << num(top + (d + 0.75) * cell_h)
       << "\" text-anchor=\"end\">" << d << "</text>\n";
  const double seconds = static_cast<double>(T) / sample_rate;
  const double tick = seconds > 4 ? 1.0 : (seconds > 1 ? 0.5 : 0.1);
  for (double s = 0.0; s <= seconds + 1e-9; s += tick) {
    const double x = left + s * sample_rate * cell_w;
    os << "<line x1=\"" << num(x) << "\" y1=\"" << num(top + height) << "\" x2=\"" << num(x) << "\" y2=\""
       << num(top + height + 4) << "\" stroke=\"#000000\"/>\n";
    os << "<text x=\"" << num(x) << "\" y=\"" << num(top + height + 16) << "\" text-anchor=\"middle\">"
       << num(s) << "</text>\n";
  }
  os << "<text x=\"" << num(left + width / 2) << "\" y=\"" << num(top + height + 34)
     << "\" text-anchor=\"middle\">time (s)</text>\n";
  os << "<text x=\"12\" y=\"" << num(top + height / 2) << "\" transform=\"rotate(-90 12 " << num(top + height / 2)
     << ")\" text-anchor=\"middle\">gesture</text>\n";
  for (const auto& span : alignment) {
    const double x0 = left + span.start * sample_rate * cell_w;
    const double x1 = left + span.end * sample_rate * cell_w;
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(top - 14) << "\" x2=\"" << num(x0) << "\" y2=\""
       << num(top + height) << "\" stroke=\"#d62728\" stroke-width=\"0.8\"/>\n";
    os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(top - 4)
       << "\" text-anchor=\"middle\" fill=\"#d62728\">" << escape(span.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<Index> top_gestures(const Tensor& H, Index k) {
  require_rank(H, 2, "top_gestures");
  const Index D = H.dim(0);
  if (k < 0) throw std::invalid_argument("top_gestures: k must be non-negative");
  const Eigen::VectorXd total = H.matrix().rowwise().sum();
  std::vector<Index> order(static_cast<std::size_t>(D));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return total[a] > total[b]; });
  order.resize(static_cast<std::size_t>(std::min(k, D)));
  return order;
}

std::string gesture_svg(const Tensor& W, Index d, const NormStats& norm, double sample_rate) {
  require_rank(W, 3, "gesture_svg");
  const Index T = W.dim(0), C = W.dim(1);
  if (d < 0 || d >= W.dim(2)) throw std::out_of_range("gesture_svg: gesture index");
  if (C % 2 != 0) throw ShapeError("gesture_svg: channels must be x,y pairs");
  if (norm.mean.size() != C || norm.stddev.size() != C) throw ShapeError("gesture_svg: norm stats size");
  RowMatrix pos(T, C);
  for (Index i = 0; i < T; ++i)
    for (Index c = 0; c < C; ++c) pos(i, c) = norm.mean[c] + norm.stddev[c] * W(i, c, d);

  double lo_x = pos(0, 0), hi_x = lo_x, lo_y = pos(0, 1), hi_y = lo_y;
  for (Index c = 0; c < C; c += 2) {
    lo_x = std::min(lo_x, pos.col(c).minCoeff());
    hi_x = std::max(hi_x, pos.col(c).maxCoeff());
    lo_y = std::min(lo_y, pos.col(c + 1).minCoeff());
    hi_y = std::max(hi_y, pos.col(c + 1).maxCoeff());
  }
  const double pad_x = std::max(1e-9, 0.05 * (hi_x - lo_x)), pad_y = std::max(1e-9, 0.05 * (hi_y - lo_y));
  const Frame f{40, 30, 520, 360, lo_x - pad_x, hi_x + pad_x, lo_y - pad_y, hi_y + pad_y};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"440\" font-family=\"sans-serif\" "
        "font-size=\"10\">\n";
  os << "<text x=\"300\" y=\"16\" text-anchor=\"middle\">gesture " << d << " (" << num(1000.0 * T / sample_rate)
     << " ms)</text>\n";
  os << "<rect x=\"40\" y=\"30\" width=\"520\" height=\"360\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (Index coil = 0; coil < C / 2; ++coil) {
    const char* color = kCoilColors[coil % 6];
    for (Index i = 0; i + 1 < T; ++i) {
      const double w = 0.5 + 3.5 * static_cast<double>(i) / static_cast<double>(std::max<Index>(T - 2, 1));
      os << "<line x1=\"" << num(f.px(pos(i, 2 * coil))) << "\" y1=\"" << num(f.py(pos(i, 2 * coil + 1)))
         << "\" x2=\"" << num(f.px(pos(i + 1, 2 * coil))) << "\" y2=\"" << num(f.py(pos(i + 1, 2 * coil + 1)))
         << "\" stroke=\"" << color << "\" stroke-width=\"" << num(w) << "\" stroke-linecap=\"round\"/>\n";
    }
    const std::string name = C == kEmaChannelCount
                                 ? std::string(kEmaChannels[static_cast<std::size_t>(2 * coil)]).substr(0, 2)
                                 : "coil" + std::to_string(coil);
    os << "<text x=\"" << num(f.px(pos(T - 1, 2 * coil)) + 5) << "\" y=\"" << num(f.py(pos(T - 1, 2 * coil + 1)))
       << "\" fill=\"" << color << "\">" << name << "</text>\n";
  }
  os << "<text x=\"300\" y=\"410\" text-anchor=\"middle\">x (anterior-posterior)</text>\n";
  os << "<text x=\"14\" y=\"210\" transform=\"rotate(-90 14 210)\" text-anchor=\"middle\">y (vertical)</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string traces_svg(const Tensor& X, const Tensor& X_hat, double sample_rate) {
  require_rank(X, 2, "traces_svg");
  if (!X.same_shape(X_hat)) throw ShapeError("traces_svg: shapes differ");
  const Index C = X.dim(0), T = X.dim(1);
  const double panel_h = 60, left = 50, width = 900, top = 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(left + width + 20) << "\" height=\""
     << num(top + panel_h * C + 50) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<text x=\"" << num(left) << "\" y=\"12\" fill=\"#000000\">original</text>"
     << "<text x=\"" << num(left + 60) << "\" y=\"12\" fill=\"#d62728\">resynthesized</text>\n";
  for (Index c = 0; c < C; ++c) {
    double lo = std::min(X.matrix().row(c).minCoeff(), X_hat.matrix().row(c).minCoeff());
    double hi = std::max(X.matrix().row(c).maxCoeff(), X_hat.matrix().row(c).maxCoeff());
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
    const Frame f{left, top + c * panel_h + 4, width, panel_h - 8, 0.0, static_cast<double>(std::max<Index>(T - 1, 1)),
                  lo, hi};
    const std::string name = C == kEmaChannelCount ? std::string(kEmaChannels[static_cast<std::size_t>(c)])
                                                   : "ch" + std::to_string(c);
    os << "<text x=\"" << num(left - 4) << "\" y=\"" << num(top + (c + 0.5) * panel_h)
       << "\" text-anchor=\"end\">" << name << "</text>\n";
    for (int which = 0; which < 2; ++which) {
      const Tensor& src = which ? X_hat : X;
      os << "<polyline fill=\"none\" stroke=\"" << (which ? "#d62728" : "#000000") << "\" stroke-width=\"1\" points=\"";
      for (Index t = 0; t < T; ++t)
        os << (t ? " " : "") << num(f.px(static_cast<double>(t))) << ',' << num(f.py(src(c, t)));
      os << "\"/>\n";
    }
  }
  const double seconds = static_cast<double>(T) / sample_rate;
  os << "<text x=\"" << num(left + width / 2) << "\" y=\"" << num(top + panel_h * C + 30)
     << "\" text-anchor=\"middle\">time (s), 0 to " << num(seconds) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

VizFiles run_viz(Checkpoint& ckpt, const Utterance& raw, const std::filesystem::path& out_dir,
                 const VizOptions& options) {
  if (raw.channels() != ckpt.config.model.channels)
    throw DataError(raw.id + ": channel count does not match the checkpoint");
  std::filesystem::create_directories(out_dir);
  const Tensor X = normalize(raw.frames, ckpt.norm);
  const Inference inf = infer(ckpt.model, nullptr, X);
  std::vector<AlignmentSpan> alignment;
  if (options.alignment) alignment = read_alignment(*options.alignment);

  VizFiles files;
  write_heatmap_csv(out_dir / "heatmap.csv", inf.H);
  files.written.push_back(out_dir / "heatmap.csv");
  write_text(out_dir / "heatmap.svg", heatmap_svg(inf.H, raw.sample_rate, alignment), files);
  files.gestures = top_gestures(inf.H, options.top_k);
  for (Index d : files.gestures)
    write_text(out_dir / ("gesture_" + std::to_string(d) + ".svg"),
               gesture_svg(ckpt.model.decoder.W.value, d, ckpt.norm, raw.sample_rate), files);
  write_text(out_dir / "traces.svg",
             traces_svg(raw.frames, denormalize(inf.X_hat, ckpt.norm), raw.sample_rate), files);
  return files;
}

}  // namespace gestures

#include "mrn/metrics.hpp"

#include <cstdio>

#include "mrn/error.hpp"
#include "mrn/mask.hpp"

namespace mrn {
namespace {

double ratio(std::uint64_t num, std::uint64_t den) { return den == 0 ? 1.0 : double(num) / double(den); }

}  // namespace

std::vector<std::uint8_t> argmax_labels(const DenseVoxelTensor& logits) {
  const GridShape& s = logits.shape();
  require(s.channels <= 255, "too many classes for byte labels");
  std::vector<std::uint8_t> out(s.voxels());
  for (std::size_t v = 0; v < out.size(); ++v) {
    const auto row = logits.voxel(std::int64_t(v));
    int best = 0;
    for (int c = 1; c < s.channels; ++c)
      if (row[std::size_t(c)] > row[std::size_t(best)]) best = c;
    out[v] = std::uint8_t(best);
  }
  return out;
}

ConfusionAccumulator::ConfusionAccumulator(int classes)
    : classes_(classes), inter_(std::size_t(classes) + 1, 0), uni_(std::size_t(classes) + 1, 0) {
  require(classes >= 1, "need at least one semantic class");
}

void ConfusionAccumulator::add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  require(predicted.size() == truth.size(), "prediction and ground truth sizes differ");
  for (std::size_t v = 0; v < truth.size(); ++v) {
    const std::uint8_t g = truth[v];
    if (g == kIgnoreLabel) continue;
    const std::uint8_t p = predicted[v];
    require(g <= classes_ && p <= classes_, "label out of range");
    const bool po = p != 0, go = g != 0;
    tp_ += po && go;
    fp_ += po && !go;
    fn_ += !po && go;
    if (p == g) {
      if (p != 0) ++inter_[p], ++uni_[p];
    } else {
      if (p != 0) ++uni_[p];
      if (g != 0) ++uni_[g];
    }
  }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& o) {
  require(o.classes_ == classes_, "class counts differ");
  tp_ += o.tp_, fp_ += o.fp_, fn_ += o.fn_;
  for (std::size_t c = 0; c < inter_.size(); ++c) inter_[c] += o.inter_[c], uni_[c] += o.uni_[c];
}

MetricsReport ConfusionAccumulator::report() const {
  MetricsReport r;
  r.sc_iou = ratio(tp_, tp_ + fp_ + fn_);
  r.sc_precision = ratio(tp_, tp_ + fp_);
  r.sc_recall = ratio(tp_, tp_ + fn_);
  double sum = 0.0;
  int present = 0;
  for (int c = 1; c <= classes_; ++c) {
    if (uni_[std::size_t(c)] == 0) {
      r.class_iou.emplace_back();
      continue;
    }
    const double iou = double(inter_[std::size_t(c)]) / double(uni_[std::size_t(c)]);
    r.class_iou.emplace_back(iou);
    sum += iou;
    ++present;
  }
  r.ssc_miou = present == 0 ? 1.0 : sum / present;
  return r;
}

MetricsReport evaluate_labels(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
                              int classes) {
  ConfusionAccumulator acc(classes);
  acc.add(predicted, truth);
  return acc.report();
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t width = 5;
  for (const auto& [name, r] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %8s  %8s\n", int(width), "", "SC-IoU", "Prec", "Recall", "mIoU");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f  %8.4f  %8.4f\n", int(width), name.c_str(), r.sc_iou,
                  r.sc_precision, r.sc_recall, r.ssc_miou);
    out += buf;
  }
  return out;
}

}  // namespace mrn

#include "mrn/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mrn/checkpoint.hpp"
#include "mrn/error.hpp"

namespace mrn {
namespace {

using nlohmann::json;

json metrics_to_json(const MetricsReport& r) {
  json classes = json::array();
  for (const auto& c : r.class_iou) classes.push_back(c ? json(*c) : json(nullptr));
  return {{"sc_iou", r.sc_iou},
          {"sc_precision", r.sc_precision},
          {"sc_recall", r.sc_recall},
          {"class_iou", classes},
          {"ssc_miou", r.ssc_miou}};
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw FormatError("cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, p);
}

// Log lines for steps before `keep`, so a resumed run continues a clean log.
std::string truncated_log(const std::filesystem::path& p, std::uint64_t keep) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("step")) continue;
    if (rec["step"].get<std::uint64_t>() < keep) out += line + "\n";
  }
  return out;
}

}  // namespace

std::string loss_json(std::uint64_t step, const LossBreakdown& l, double grad_norm) {
  return json{{"step", step},     {"l_mssc", l.l_mssc}, {"l_mask", l.l_mask},
              {"l_scal", l.l_scal}, {"total", l.total},   {"grad_norm", grad_norm}}
      .dump();
}

std::string metrics_json(const MetricsReport& r) { return metrics_to_json(r).dump(); }

std::string eval_json(const EvalReport& r) {
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back(metrics_to_json(s));
  return json{{"coarse", metrics_to_json(r.coarse())}, {"refined", metrics_to_json(r.refined())}, {"stages", stages}}
      .dump(2);
}

EvalReport evaluate(Model& model, const std::vector<SceneSample>& scenes) {
  const int n = int(scenes.size());
  const std::size_t stages = model.config.mrn ? std::size_t(model.config.iterations) + 1 : 1;
  std::vector<std::vector<ConfusionAccumulator>> per_scene(
      scenes.size(), std::vector<ConfusionAccumulator>(stages, ConfusionAccumulator(model.config.classes)));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    Tape tape;
    const ForwardResult f = forward(tape, model, scenes[std::size_t(i)]);
    for (std::size_t s = 0; s < stages; ++s)
      per_scene[std::size_t(i)][s].add(argmax_labels(f.logits[s].dense()), scenes[std::size_t(i)].labels);
  }
  EvalReport report;
  for (std::size_t s = 0; s < stages; ++s) {
    ConfusionAccumulator acc(model.config.classes);
    for (const auto& p : per_scene) acc.merge(p[s]);
    report.stages.push_back(acc.report());
  }
  return report;
}

LossBreakdown train_step(Model& model, const SceneSample& scene, double lr, std::uint64_t dropout_seed,
                         double* grad_norm) {
  std::mt19937_64 dropout(dropout_seed);
  Tape tape;
  const ForwardResult f = forward(tape, model, scene, {true, &dropout});
  LossOptions lo;
  lo.gamma_mssc = model.config.gamma_mssc;
  lo.gamma_mask = model.config.gamma_mask;
  lo.mask_loss = model.config.mask_loss;
  lo.balanced_bce = model.config.balanced_bce;
  const TotalLoss loss = total_loss(tape, f.logits, f.occupancy, scene.labels, lo);
  if (!std::isfinite(loss.breakdown.total)) return loss.breakdown;
  backward(tape, loss.total);
  const double norm = clip_grad_norm(model.params, model.config.grad_clip);
  if (grad_norm) *grad_norm = norm;
  if (!std::isfinite(norm)) {
    model.params.zero_grad();
    return loss.breakdown;
  }
  sgd_step(model.params, lr);
  return loss.breakdown;
}

TrainResult train(const ExperimentConfig& config, const std::filesystem::path& out_dir, const TrainOptions& options) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  const auto ckpt_path = out_dir / "checkpoint.bin";
  const auto log_path = out_dir / "train_log.jsonl";
  const std::string config_text = to_text(config);

  TrainResult result{build_model(config), {}, 0, 0, std::nullopt};
  Model& model = result.model;
  if (options.resume && std::filesystem::exists(ckpt_path)) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    if (ck.config_text != config_text) throw FormatError("checkpoint was written with a different config");
    copy_parameters(ck.params, model.params);
    result.steps_done = ck.steps_done;
    result.epochs_done = ck.epochs_done;
  }
  write_text(out_dir / "config.cfg", config_text);
  write_text(log_path, result.steps_done > 0 ? truncated_log(log_path, result.steps_done) : std::string());

  const auto scenes = generate_scenes(config.seed, kTrainStream, config.train_scenes, config);
  const std::uint64_t per_epoch = scenes.size();
  const std::uint64_t total_steps = per_epoch * std::uint64_t(config.epochs);
  const int last_epoch = options.stop_after_epochs ? std::min(config.epochs, *options.stop_after_epochs) : config.epochs;

  std::ofstream log(log_path, std::ios::app);
  for (int epoch = int(result.epochs_done); epoch < last_epoch; ++epoch) {
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle(derive_seed(config.seed, kShuffleStream, std::uint64_t(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle);
    double epoch_loss = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::uint64_t step = std::uint64_t(epoch) * per_epoch + k;
      const double lr = poly_lr(config.lr, step, total_steps, config.poly_power);
      double grad_norm = 0.0;
      const LossBreakdown loss =
          train_step(model, scenes[order[k]], lr, derive_seed(config.seed, kDropoutStream, step), &grad_norm);
      if (!std::isfinite(loss.total) || !std::isfinite(grad_norm)) {
        log << json{{"step", step}, {"error", "non-finite loss or gradient"}, {"scene", order[k]}, {"l_mssc", loss.l_mssc},
                    {"l_mask", loss.l_mask}, {"l_scal", loss.l_scal}}
                   .dump()
            << '\n';
        log.flush();
        throw NonFiniteLossError("non-finite loss or gradient at step " + std::to_string(step));
      }
      log << loss_json(step, loss, grad_norm) << '\n';
      result.history.push_back({step, lr, grad_norm, loss});
      epoch_loss += loss.total;
    }
    log.flush();
    result.steps_done = std::uint64_t(epoch + 1) * per_epoch;
    result.epochs_done = std::uint64_t(epoch + 1);
    Checkpoint ck{config_text, result.steps_done, result.epochs_done, model.params};
    save_checkpoint(ckpt_path.string() + ".tmp", ck);
    std::filesystem::rename(ckpt_path.string() + ".tmp", ckpt_path);
    if (options.progress)
      *options.progress << "epoch " << epoch + 1 << "/" << config.epochs << " mean loss "
                        << epoch_loss / double(per_epoch) << std::endl;
  }

  if (options.evaluate && result.epochs_done == std::uint64_t(config.epochs)) {
    const auto eval_scenes = generate_scenes(config.seed, kEvalStream, config.eval_scenes, config);
    result.eval = evaluate(model, eval_scenes);
    write_text(out_dir / "metrics.json", eval_json(*result.eval) + "\n");
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (std::size_t s = 0; s < result.eval->stages.size(); ++s)
      rows.emplace_back("y" + std::to_string(s), result.eval->stages[s]);
    write_text(out_dir / "metrics.txt", metrics_table(rows));
  }
  return result;
}

Model load_model(const std::filesystem::path& checkpoint) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  Model m = build_model(parse_config(ck.config_text));
  copy_parameters(ck.params, m.params);
  return m;
}

std::vector<RobustnessRow> robustness_report(Model& model, const std::vector<SceneSample>& scenes,
                                             const std::vector<PerturbKind>& kinds,
                                             const std::vector<PerturbLevel>& levels) {
  std::vector<RobustnessRow> rows;
  for (PerturbKind kind : kinds)
    for (PerturbLevel level : levels) {
      std::vector<SceneSample> perturbed;
      perturbed.reserve(scenes.size());
      for (const auto& s : scenes) perturbed.push_back(perturb(s, kind, level));
      const EvalReport r = evaluate(model, perturbed);
      rows.push_back({kind, level, r.coarse(), r.refined()});
    }
  return rows;
}

std::string robustness_table(const std::vector<RobustnessRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %-7s  %12s  %12s  %12s  %12s\n", "kind", "level", "coarse IoU", "coarse mIoU",
                "refined IoU", "refined mIoU");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %-7s  %12.4f  %12.4f  %12.4f  %12.4f\n", to_string(r.kind).c_str(),
                  to_string(r.level).c_str(), r.coarse.sc_iou, r.coarse.ssc_miou, r.refined.sc_iou, r.refined.ssc_miou);
    out += buf;
  }
  return out;
}

}  // namespace mrn

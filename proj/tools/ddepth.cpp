// ddepth: generate synthetic data, train, predict, evaluate and map.
//
// Every subcommand writes <out>/resolved_config.txt; passing that file back
// through --config reproduces the run. Exit codes: 0 ok, 2 validation, 3 I/O.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddepth/evalharness.hpp"
#include "ddepth/inference.hpp"
#include "ddepth/io.hpp"
#include "ddepth/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ddepth;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

/// Option registry for one subcommand: binds CLI11 options and can echo the
/// resolved values as key=value lines.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& key, T& value, const std::string& help) {
    printers_.emplace_back(key, [&value] { return render(value); });
    return app_->add_option("--" + key, value, help);
  }

  CLI::Option* flag(const std::string& key, bool& value, const std::string& help) {
    printers_.emplace_back(key, [&value] { return std::string(value ? "true" : "false"); });
    return app_->add_flag("--" + key, value, help);
  }

  std::string echo() const {
    std::string out;
    for (const auto& [key, print] : printers_) out += key + "=" + print() + "\n";
    return out;
  }

 private:
  static std::string render(const std::string& s) { return s; }
  static std::string render(double v) { return io::fmt_double(v); }
  template <typename T>
  static std::string render(const T& v) {
    return std::to_string(v);
  }

  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> printers_;
};

/// Expands "--config FILE" into "--key value" arguments for every key the
/// command line does not already set. Unknown keys fall through to CLI11,
/// which rejects them.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file argument");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;
  std::istringstream in(io::read_file(config_path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(config_path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string opt = "--" + key;
    bool given = false;
    for (const auto& a : rest) given = given || a == opt || a.rfind(opt + "=", 0) == 0;
    if (given) continue;
    if (value == "true") {
      rest.push_back(opt);
    } else if (value != "false") {
      rest.push_back(opt);
      rest.push_back(value);
    }
  }
  return rest;
}

void prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

PointEstimate parse_point(const std::string& s) {
  if (s == "expectation") return PointEstimate::expectation;
  if (s == "most-likely") return PointEstimate::most_likely;
  throw ValidationError("unknown point estimate '" + s + "' (expectation, most-likely)");
}

std::vector<int> parse_hidden(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ValidationError("--hidden expects comma-separated integers, got '" + s + "'");
    }
    require(out.back() > 0, "--hidden widths must be positive");
  }
  require(!out.empty(), "--hidden must list at least one layer");
  return out;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::size_t pixels = 10000;
  double ambiguous = 0.2;
  std::uint64_t seed = 0;
  std::string out;
  double min_depth = 1.0;
  double max_depth = 80.0;
  int nuisance_dims = 2;
  std::string scene;
  std::string trajectory;
};

void cmd_gen(const GenArgs& a) {
  require(a.ambiguous >= 0.0 && a.ambiguous <= 1.0, "--ambiguous must be in [0, 1]");
  PixelWorld world;
  world.min_depth = a.min_depth;
  world.max_depth = a.max_depth;
  world.nuisance_dims = a.nuisance_dims;
  io::PixelDataset data{world, generate_pixels(world, a.pixels, a.ambiguous, a.seed)};
  io::write_dataset(join(a.out, "pixels.pixd"), data);
  if (!a.scene.empty() || !a.trajectory.empty()) {
    require(!a.scene.empty() && !a.trajectory.empty(), "--scene and --trajectory must be given together");
    const SceneSpec scene = io::read_scene(a.scene);
    const auto poses = io::read_trajectory(a.trajectory);
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const RenderedView v = render_depth(scene, poses[i]);
      char name[32];
      std::snprintf(name, sizeof name, "view_%03zu.dimg", i);
      io::write_dimg(join(a.out, name), v.height, v.width, v.depth);
      std::snprintf(name, sizeof name, "view_%03zu_alt.dimg", i);
      io::write_dimg(join(a.out, name), v.height, v.width, v.alt_depth);
    }
  }
}

struct TrainArgs {
  std::string data;
  std::string loss = "binary";
  int bins = 64;
  int epochs = 60;
  double lr = 1e-4;
  double lr_decay = 0.1;
  int decay_epoch = 45;
  int batch = 32;
  double dropout = 0.0;
  int heads = 1;
  std::string hidden = "64,64";
  double sigma = 0.0;
  bool hard_labels = false;
  double berhu_fraction = 0.2;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_train(const TrainArgs& a) {
  const LossKind loss = parse_loss(a.loss);
  require(a.heads == 1 || loss == LossKind::mhl, "--heads only applies to --loss mhl");
  if (!fs::exists(a.data)) throw IoError("dataset '" + a.data + "' not found");
  const io::PixelDataset data = io::read_dataset(a.data);
  TrainConfig c;
  c.learning_rate = a.lr;
  c.lr_decay = a.lr_decay;
  c.decay_epoch = a.decay_epoch;
  c.epochs = a.epochs;
  c.batch_size = a.batch;
  c.dropout = a.dropout;
  c.seed = a.seed;
  c.loss = loss;
  c.binning = DepthBinning(data.world.min_depth, data.world.max_depth, a.bins);
  c.sigma = a.sigma;
  c.soft_labels = !a.hard_labels;
  c.heads = a.heads;
  c.hidden = parse_hidden(a.hidden);
  c.berhu_fraction = a.berhu_fraction;
  const TrainResult r = train(data.training_set(), c);

  io::Checkpoint ck;
  ck.loss = loss;
  ck.binning = c.binning;
  ck.sigma = c.loss_context().effective_sigma();
  ck.dropout = c.dropout;
  ck.world = data.world;
  ck.params = r.params;
  io::write_checkpoint(join(a.out, "model.ckpt"), ck);
  std::string log = "epoch,learning_rate,mean_loss\n";
  for (const auto& e : r.log) {
    log += std::to_string(e.epoch) + "," + io::fmt_double(e.learning_rate) + "," + io::fmt_double(e.mean_loss) + "\n";
  }
  io::write_file(join(a.out, "loss_log.csv"), log);
}

struct PredictArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  int mc_samples = 0;
  double dropout = 0.5;
  int bins = 0;
  std::uint64_t seed = 0;
};

void cmd_predict(const PredictArgs& a) {
  const io::Checkpoint ck = io::read_checkpoint(a.checkpoint);
  require(a.bins == 0 || a.bins == ck.binning.bins(),
          "checkpoint was trained with " + std::to_string(ck.binning.bins()) + " bins, not " + std::to_string(a.bins));
  require(a.mc_samples >= 0, "--mc-samples must be >= 0");
  const io::PixelDataset data = io::read_dataset(a.data);
  require(static_cast<int>(data.samples.front().feature.size()) == ck.params.architecture().input_dim,
          "dataset feature size does not match the checkpoint");
  const int n = static_cast<int>(data.samples.size());
  const bool mc = a.mc_samples > 0;
  Rng rng(a.seed);

  std::vector<std::vector<std::vector<double>>> passes(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& f = data.samples[i].feature;
    passes[i] = mc ? predict_mc_dropout(ck.params, f, a.mc_samples, a.dropout, rng)
                   : std::vector<std::vector<double>>{forward(ck.params, f)};
  }

  std::vector<double> mc_uncertainty;
  if (is_classification(ck.loss)) {
    std::vector<DepthDistribution> dists;
    for (std::size_t i = 0; i < passes.size(); ++i) {
      if (!mc) {
        dists.push_back(normalize(passes[i].front()));
        continue;
      }
      std::vector<DepthDistribution> samples;
      for (const auto& o : passes[i]) samples.push_back(normalize(o));
      dists.push_back(average_distributions(samples));
      mc_uncertainty.push_back(decode_mc_samples(ck.loss, ck.binning, passes[i]).uncertainty);
    }
    io::write_ddmp(join(a.out, "predictions.ddmp"), 1, n, ck.binning, dists);
  } else if (ck.loss == LossKind::gaussian && !mc) {
    std::vector<double> v;
    for (const auto& p : passes) {
      v.push_back(std::exp(p.front()[0]));
      v.push_back(std::exp(p.front()[1]));
    }
    io::write_file(join(a.out, "predictions.dgau"), io::encode_channels("DGAU1", 1, n, 2, v));
  } else if (ck.loss == LossKind::mhl && !mc) {
    std::vector<double> v;
    for (const auto& p : passes) {
      for (double h : p.front()) v.push_back(std::exp(h));
    }
    const int heads = ck.params.architecture().output_dim;
    io::write_file(join(a.out, "predictions.dhyp"), io::encode_channels("DHYP1", 1, n, heads, v));
  } else {
    std::vector<double> depth;
    for (const auto& p : passes) {
      const PixelPrediction pp = mc ? decode_mc_samples(ck.loss, ck.binning, p)
                                    : decode_output(ck.loss, ck.binning, p.front());
      depth.push_back(pp.depth);
      if (mc) mc_uncertainty.push_back(pp.uncertainty);
    }
    io::write_dimg(join(a.out, "predictions.dimg"), 1, n, depth);
  }
  if (mc) io::write_dimg(join(a.out, "uncertainty.dimg"), 1, n, mc_uncertainty);
}

struct EvalArgs {
  std::string pred;
  std::string data;
  std::string out;
  std::string uncertainty;
  int hypotheses = 0;
  std::string point = "expectation";
  std::uint64_t seed = 0;
};

std::vector<EvalRecord> load_records(const EvalArgs& a) {
  const io::PixelDataset data = io::read_dataset(a.data);
  const std::size_t n = data.samples.size();
  const PointEstimate point = parse_point(a.point);
  const int want = std::max(a.hypotheses, 1);
  std::vector<EvalRecord> recs(n);
  auto check_count = [&](std::size_t got) {
    require(got == n, "prediction count " + std::to_string(got) + " does not match " + std::to_string(n) +
                          " ground-truth records");
  };
  const std::string magic = io::peek_magic(a.pred);
  if (magic == "DDMP1") {
    const auto dump = io::read_ddmp(a.pred);
    check_count(dump.pixels());
    require(want <= dump.binning.bins(), "--hypotheses exceeds the bin count");
    for (std::size_t i = 0; i < n; ++i) {
      const PixelPrediction p = decode_distribution(dump.distribution(i), dump.binning, point, want);
      recs[i] = {p.depth, data.samples[i].gt_depth, p.uncertainty, p.hypotheses};
    }
  } else {
    const auto dump = io::read_channels(a.pred);
    check_count(dump.pixels());
    for (std::size_t i = 0; i < n; ++i) {
      EvalRecord& r = recs[i];
      r.gt = data.samples[i].gt_depth;
      r.pred = dump.at(i, 0);
      if (dump.magic == "DGAU1") r.uncertainty = dump.at(i, 1);
      for (int c = 0; c < (dump.magic == "DHYP1" ? dump.channels : 1); ++c) r.hypotheses.push_back(dump.at(i, c));
    }
    require(want <= static_cast<int>(recs.front().hypotheses.size()),
            "--hypotheses exceeds the hypotheses stored in '" + a.pred + "'");
  }
  if (!a.uncertainty.empty()) {
    const auto u = io::read_channels(a.uncertainty);
    check_count(u.pixels());
    for (std::size_t i = 0; i < n; ++i) recs[i].uncertainty = u.at(i);
  }
  return recs;
}

std::string svg_plot(const std::vector<std::pair<std::string, SparsificationCurve>>& curves) {
  const double w = 480, h = 320, pad = 40;
  double ymax = 0.0;
  for (const auto& [name, c] : curves)
    for (const auto& p : c.points) ymax = std::max(ymax, p.value);
  if (ymax <= 0.0) ymax = 1.0;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  char buf[128];
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\">\n";
  s += "<rect width=\"480\" height=\"320\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", pad, h - pad,
                w - pad, h - pad);
  s += buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", pad, pad, pad,
                h - pad);
  s += buf;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    s += "<polyline fill=\"none\" stroke=\"" + std::string(colors[k % 4]) + "\" points=\"";
    for (const auto& p : curves[k].second.points) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", pad + p.fraction * (w - 2 * pad),
                    h - pad - p.value / ymax * (h - 2 * pad));
      s += buf;
    }
    s += "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"12\" fill=\"%s\">", pad + 8,
                  pad + 14.0 * (k + 1), colors[k % 4]);
    s += buf + curves[k].first + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void cmd_eval(const EvalArgs& a) {
  require(a.hypotheses >= 0, "--hypotheses must be >= 0");
  const auto recs = load_records(a);
  const StandardMetrics m = standard_metrics(recs);
  std::string metrics = "metric,value\n";
  const std::pair<const char*, double> rows[] = {{"are", m.are},       {"rmse", m.rmse},     {"rmse_log", m.rmse_log},
                                                 {"log10", m.log10},   {"delta1", m.delta1}, {"delta2", m.delta2},
                                                 {"delta3", m.delta3}};
  for (const auto& [k, v] : rows) metrics += std::string(k) + "," + io::fmt_double(v) + "\n";
  io::write_file(join(a.out, "metrics.csv"), metrics);

  const Metric curve_metrics[] = {Metric::are, Metric::rmse, Metric::one_minus_delta1};
  std::vector<SparsificationCurve> method;
  std::vector<SparsificationCurve> oracle;
  for (Metric cm : curve_metrics) {
    method.push_back(sparsification(recs, cm));
    oracle.push_back(oracle_curve(recs, cm));
  }
  std::string curves = "fraction";
  for (Metric cm : curve_metrics) curves += "," + std::string(metric_name(cm));
  for (Metric cm : curve_metrics) curves += ",oracle_" + std::string(metric_name(cm));
  curves += "\n";
  for (std::size_t i = 0; i < method.front().points.size(); ++i) {
    curves += io::fmt_double(method.front().points[i].fraction);
    for (const auto& c : method) curves += "," + io::fmt_double(c.points[i].value);
    for (const auto& c : oracle) curves += "," + io::fmt_double(c.points[i].value);
    curves += "\n";
  }
  io::write_file(join(a.out, "sparsification.csv"), curves);

  std::string aucs = "metric,auc,oracle_auc\n";
  for (std::size_t k = 0; k < method.size(); ++k) {
    aucs += std::string(metric_name(method[k].metric)) + "," + io::fmt_double(auc(method[k])) + "," +
            io::fmt_double(auc(oracle[k])) + "\n";
  }
  io::write_file(join(a.out, "auc.csv"), aucs);
  io::write_file(join(a.out, "sparsification.svg"),
                 svg_plot({{"are", method[0]}, {"oracle are", oracle[0]}}));

  if (a.hypotheses > 0) {
    std::string hyp = "hypotheses,are,rmse,one_minus_delta1\n";
    for (int mm = 1; mm <= a.hypotheses; ++mm) {
      hyp += std::to_string(mm);
      for (Metric cm : curve_metrics) hyp += "," + io::fmt_double(oracle_multihyp(recs, mm, cm));
      hyp += "\n";
    }
    io::write_file(join(a.out, "hypotheses.csv"), hyp);
  }
}

struct MapArgs {
  std::string scene;
  std::string trajectory;
  std::string checkpoint;
  std::string out;
  std::string depth_source = "model";
  std::string point = "expectation";
  double keep_fraction = 1.0;
  double resolution = 0.25;
  std::uint64_t seed = 0;
};

void cmd_map(const MapArgs& a) {
  for (const auto& p : {a.scene, a.trajectory}) {
    if (!fs::exists(p)) throw IoError("'" + p + "' not found");
  }
  const SceneSpec scene = io::read_scene(a.scene);
  const auto poses = io::read_trajectory(a.trajectory);
  MapRunConfig mc;
  mc.resolution = a.resolution;
  mc.keep_fraction = a.keep_fraction;
  mc.point = parse_point(a.point);
  mc.seed = a.seed;
  require(a.depth_source == "model" || a.depth_source == "gt", "--depth-source must be 'model' or 'gt'");
  mc.source = a.depth_source == "gt" ? DepthSource::ground_truth : DepthSource::model;
  require(mc.keep_fraction > 0.0 && mc.keep_fraction <= 1.0, "--keep-fraction must be in (0, 1]");
  std::optional<io::Checkpoint> ck;
  if (mc.source == DepthSource::model) {
    require(!a.checkpoint.empty(), "--checkpoint is required for model depth");
    ck = io::read_checkpoint(a.checkpoint);
  }
  const MapRunResult r = run_mapping(scene, poses, ck ? &*ck : nullptr, mc);
  io::write_file(join(a.out, "map.csv"), io::encode_map_csv(r.grid));

  const VoxelGrid truth = ground_truth_grid(scene, a.resolution);
  char label[64];
  if (mc.source == DepthSource::ground_truth) {
    std::snprintf(label, sizeof label, "gt-depth");
  } else {
    std::snprintf(label, sizeof label, "%s-%g%%", std::string(loss_name(ck->loss)).c_str(), 100.0 * a.keep_fraction);
  }
  std::string report = "method,accuracy_percent,memory_bytes,occupied_cells,observed_cells,integrated_pixels\n";
  report += std::string(label) + "," + io::fmt_double(r.accuracy.percent) + "," + std::to_string(r.memory_bytes) +
            "," + std::to_string(r.accuracy.occupied) + "," + std::to_string(r.accuracy.observed) + "," +
            std::to_string(r.integrated_pixels) + "\n";
  report += "reference-grid,100," + std::to_string(memory_estimate(truth)) + "," +
            std::to_string(truth.count(CellState::occupied)) + "," + std::to_string(truth.cell_count()) + ",0\n";
  io::write_file(join(a.out, "report.csv"), report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-as-classification toolkit: synthetic data, training, prediction, evaluation, mapping"};
  app.require_subcommand(1);

  GenArgs gen;
  TrainArgs tr;
  PredictArgs pr;
  EvalArgs ev;
  MapArgs mp;

  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic pixel dataset (and optional depth renders)");
  OptionSet gen_opts(gen_cmd);
  gen_opts.add("pixels", gen.pixels, "number of pixel records")->check(CLI::PositiveNumber);
  gen_opts.add("ambiguous", gen.ambiguous, "fraction of bimodal pixels");
  gen_opts.add("seed", gen.seed, "random seed")->required();
  gen_opts.add("out", gen.out, "output directory")->required();
  gen_opts.add("min-depth", gen.min_depth, "minimum depth (m)");
  gen_opts.add("max-depth", gen.max_depth, "maximum depth (m)");
  gen_opts.add("nuisance-dims", gen.nuisance_dims, "uninformative feature dimensions");
  gen_opts.add("scene", gen.scene, "scene file to render");
  gen_opts.add("trajectory", gen.trajectory, "pose file to render from");

  auto* train_cmd = app.add_subcommand("train", "train a model on a pixel dataset");
  OptionSet train_opts(train_cmd);
  train_opts.add("data", tr.data, "pixel dataset")->required();
  train_opts.add("loss", tr.loss, "loss: " + valid_loss_names());
  train_opts.add("bins", tr.bins, "number of depth bins");
  train_opts.add("epochs", tr.epochs, "training epochs");
  train_opts.add("lr", tr.lr, "initial learning rate");
  train_opts.add("lr-decay", tr.lr_decay, "learning-rate decay factor");
  train_opts.add("decay-epoch", tr.decay_epoch, "epochs before the decay applies");
  train_opts.add("batch", tr.batch, "minibatch size");
  train_opts.add("dropout", tr.dropout, "dropout probability after each hidden layer");
  train_opts.add("heads", tr.heads, "hypothesis heads (mhl)");
  train_opts.add("hidden", tr.hidden, "hidden layer widths, comma separated");
  train_opts.add("sigma", tr.sigma, "soft-target width in bins (0: 25%/0.5 rule)");
  train_opts.flag("hard-labels", tr.hard_labels, "one-hot targets instead of soft targets");
  train_opts.add("berhu-fraction", tr.berhu_fraction, "berhu threshold as a fraction of the max residual");
  train_opts.add("seed", tr.seed, "random seed")->required();
  train_opts.add("out", tr.out, "output directory")->required();

  auto* predict_cmd = app.add_subcommand("predict", "run a checkpoint over a pixel dataset");
  OptionSet predict_opts(predict_cmd);
  predict_opts.add("checkpoint", pr.checkpoint, "model checkpoint")->required();
  predict_opts.add("data", pr.data, "pixel dataset")->required();
  predict_opts.add("out", pr.out, "output directory")->required();
  predict_opts.add("mc-samples", pr.mc_samples, "Monte-Carlo dropout passes (0: deterministic)");
  predict_opts.add("dropout", pr.dropout, "dropout probability for Monte-Carlo passes");
  predict_opts.add("bins", pr.bins, "expected bin count (0: take from checkpoint)");
  predict_opts.add("seed", pr.seed, "random seed");

  auto* eval_cmd = app.add_subcommand("eval", "metrics, sparsification curves and hypothesis oracle");
  OptionSet eval_opts(eval_cmd);
  eval_opts.add("pred", ev.pred, "prediction dump (DDMP, DIMG, DGAU or DHYP)")->required();
  eval_opts.add("data", ev.data, "pixel dataset with ground truth")->required();
  eval_opts.add("out", ev.out, "output directory")->required();
  eval_opts.add("uncertainty", ev.uncertainty, "DIMG of per-pixel uncertainty overriding the default");
  eval_opts.add("hypotheses", ev.hypotheses, "evaluate the best-of-M oracle for M = 1..N");
  eval_opts.add("point", ev.point, "point estimate: expectation or most-likely");
  eval_opts.add("seed", ev.seed, "random seed (unused; kept in resolved_config.txt)");

  auto* map_cmd = app.add_subcommand("map", "fuse depth into an occupancy grid and score it");
  OptionSet map_opts(map_cmd);
  map_opts.add("scene", mp.scene, "scene file")->required();
  map_opts.add("trajectory", mp.trajectory, "pose file")->required();
  map_opts.add("checkpoint", mp.checkpoint, "model checkpoint (model depth)");
  map_opts.add("out", mp.out, "output directory")->required();
  map_opts.add("depth-source", mp.depth_source, "model or gt");
  map_opts.add("point", mp.point, "point estimate: expectation or most-likely");
  map_opts.add("keep-fraction", mp.keep_fraction, "fraction of most confident pixels to fuse");
  map_opts.add("resolution", mp.resolution, "voxel size (m)");
  map_opts.add("seed", mp.seed, "random seed for feature noise");

  struct Entry {
    CLI::App* cmd;
    const OptionSet* opts;
    const std::string* out;
    std::function<void()> run;
  };
  const std::vector<Entry> entries = {
      {gen_cmd, &gen_opts, &gen.out, [&] { cmd_gen(gen); }},
      {train_cmd, &train_opts, &tr.out, [&] { cmd_train(tr); }},
      {predict_cmd, &predict_opts, &pr.out, [&] { cmd_predict(pr); }},
      {eval_cmd, &eval_opts, &ev.out, [&] { cmd_eval(ev); }},
      {map_cmd, &map_opts, &mp.out, [&] { cmd_map(mp); }},
  };

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (const auto& e : entries) {
      if (!e.cmd->parsed()) continue;
      prepare_out(*e.out);
      io::write_file(join(*e.out, "resolved_config.txt"), "# " + e.cmd->get_name() + "\n" + e.opts->echo());
      e.run();
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}

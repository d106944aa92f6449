// cseg: command-line front end.
//
// Errors go to stderr as one line, `error=<category> <message>`, and the
// exit status identifies the category (see exit_code below).

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cseg/blobs.hpp"
#include "cseg/consensus.hpp"
#include "cseg/descriptor.hpp"
#include "cseg/geometry.hpp"
#include "cseg/gradcheck.hpp"
#include "cseg/harness.hpp"
#include "cseg/rng.hpp"

namespace {

using namespace cseg;
namespace fs = std::filesystem;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kDimension: return 3;
    case ErrorCategory::kFormat: return 4;
    case ErrorCategory::kIo: return 5;
    case ErrorCategory::kInvalidArgument: return 6;
    case ErrorCategory::kDegenerate: return 7;
    case ErrorCategory::kNonFinite: return 8;
  }
  return 1;
}

constexpr int kUsageExit = 2;
constexpr int kCheckFailedExit = 9;

struct ExperimentFlags {
  ExperimentConfig cfg;
  std::string loss = "consensus";
  std::string blob_source = "synth";

  ExperimentConfig resolve() {
    cfg.loss = parse_loss_kind(loss);
    cfg.blob_source = parse_blob_source(blob_source);
    cfg.validate();
    return cfg;
  }
};

// CLI11 reads config files for the top-level app only, so subcommands
// take a plain --config option and the file is applied after parsing.
std::map<const CLI::App*, std::string> config_paths;

void add_config_option(CLI::App* app) {
  app->add_option("--config", config_paths[app], "key=value file; flags given on the command line win");
}

// Unknown keys are usage errors so typos do not pass silently.
void apply_config(CLI::App* app) {
  const std::string& path = config_paths[app];
  if (path.empty()) return;
  std::ifstream probe(path);
  if (!probe) fail(ErrorCategory::kIo, "cannot open config " + path);
  for (const CLI::ConfigItem& item : CLI::ConfigBase().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string key = item.fullname();
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw CLI::ConversionError("unknown config key '" + key + "' in " + path);
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

// Every config key is also a flag of the same name.
void add_experiment_options(CLI::App* app, ExperimentFlags& f) {
  add_config_option(app);
  auto& c = f.cfg;
  app->add_option("--seed", c.seed)->capture_default_str();
  app->add_option("--image_size", c.image_size)->capture_default_str();
  app->add_option("--train_count", c.train_count)->capture_default_str();
  app->add_option("--val_count", c.val_count)->capture_default_str();
  app->add_option("--test_count", c.test_count)->capture_default_str();
  app->add_option("--max_occluders", c.max_occluders)->capture_default_str();
  app->add_option("--noise", c.noise)->capture_default_str();
  app->add_option("--loss", f.loss, "pixelwise | blob_marginalized | consensus")->capture_default_str();
  app->add_option("--blob_source", f.blob_source, "synth | labels")->capture_default_str();
  app->add_option("--alpha", c.alpha)->capture_default_str();
  app->add_option("--beta", c.beta)->capture_default_str();
  app->add_option("--learning_rate", c.learning_rate)->capture_default_str();
  app->add_option("--plateau_factor", c.plateau_factor)->capture_default_str();
  app->add_option("--plateau_patience", c.plateau_patience)->capture_default_str();
  app->add_option("--min_learning_rate", c.min_learning_rate)->capture_default_str();
  app->add_option("--epochs", c.epochs)->capture_default_str();
  app->add_option("--batch_size", c.batch_size)->capture_default_str();
  app->add_option("--flip", c.flip)->capture_default_str();
  app->add_option("--dropout", c.dropout)->capture_default_str();
}

std::vector<LayerSpec> pick_descriptor(const std::string& path, const std::string& builtin, int classes) {
  if (!path.empty()) return load_descriptor(path);
  if (builtin == "appendix") return appendix_descriptor();
  if (builtin == "desk") return desk_descriptor(classes, 0.0);
  fail(ErrorCategory::kInvalidArgument, "unknown builtin descriptor '" + builtin + "'");
}

Shape parse_shape(const std::string& text) {
  Shape s{};
  char sep1 = 0;
  char sep2 = 0;
  std::istringstream in(text);
  if (!(in >> s[0] >> sep1 >> s[1] >> sep2 >> s[2]) || sep1 != ',' || sep2 != ',' || !(in >> std::ws).eof()) {
    fail(ErrorCategory::kInvalidArgument, "input shape must be C,H,W: '" + text + "'");
  }
  return s;
}

// Logits in [-3,3] and Voronoi-cell blobs, one random class per blob.
struct Instance {
  Tensor logits;
  LabelMap labels;
  BlobMap blobs;
};

Instance random_instance(std::mt19937_64& rng, int k, int n, int blob_count) {
  Instance out{Tensor({static_cast<std::size_t>(k), static_cast<std::size_t>(n), static_cast<std::size_t>(n)}),
               LabelMap(n, n, 0), BlobMap{Grid<int>(n, n, 0), blob_count - 1}};
  for (double& v : out.logits.values()) v = uniform(rng, -3.0, 3.0);
  std::vector<int> seeds;
  while (static_cast<int>(seeds.size()) < blob_count) {
    const int s = uniform_int(rng, 0, n * n - 1);
    if (std::find(seeds.begin(), seeds.end(), s) == seeds.end()) seeds.push_back(s);
  }
  std::vector<int> cls(seeds.size());
  for (int& c : cls) c = uniform_int(rng, 0, k - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int best = 0;
      int best_d = 1 << 30;
      for (std::size_t b = 0; b < seeds.size(); ++b) {
        const int di = seeds[b] / n - i;
        const int dj = seeds[b] % n - j;
        if (di * di + dj * dj < best_d) {
          best_d = di * di + dj * dj;
          best = static_cast<int>(b);
        }
      }
      out.blobs.ids(i, j) = best;
      out.labels(i, j) = cls[static_cast<std::size_t>(best)];
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorCategory::kIo, "cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"consensus segmentation toolkit"};
  app.require_subcommand(1);

  // synth
  ExperimentFlags synth_flags;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic occlusion dataset");
  add_experiment_options(synth, synth_flags);
  synth->add_option("--out", synth_out, "dataset directory")->required();

  // pipeline
  std::string full_path, pose_path, teacher_path, labels_out, blobs_out;
  RefineKernels kernels;
  auto* pipeline = app.add_subcommand("pipeline", "full + teacher masks -> label and blob maps");
  add_config_option(pipeline);
  auto* full_opt = pipeline->add_option("--full", full_path, "full face mask (PGM)");
  auto* pose_opt = pipeline->add_option("--pose", pose_path, "pose + contour file");
  full_opt->excludes(pose_opt);
  pipeline->add_option("--teacher", teacher_path, "teacher face mask (PGM)")->required();
  pipeline->add_option("--labels_out", labels_out, "label map (PGM)")->required();
  pipeline->add_option("--blobs_out", blobs_out, "blob map (.cseg)")->required();
  pipeline->add_option("--erode_height", kernels.erode_height)->capture_default_str();
  pipeline->add_option("--erode_width", kernels.erode_width)->capture_default_str();
  pipeline->add_option("--dilate_size", kernels.dilate_size)->capture_default_str();

  // train
  ExperimentFlags train_flags;
  std::string train_data, train_run;
  auto* train_cmd = app.add_subcommand("train", "train the desk-scale network");
  add_experiment_options(train_cmd, train_flags);
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--run", train_run, "run directory")->required();

  // eval
  EvalOptions eval_opts;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on one split");
  add_config_option(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint)->required();
  eval_cmd->add_option("--descriptor", eval_opts.descriptor, "defaults to model.desc beside the checkpoint");
  eval_cmd->add_option("--data", eval_opts.data_dir)->required();
  eval_cmd->add_option("--split", eval_opts.split)->capture_default_str();
  eval_cmd->add_option("--method", eval_opts.method)->capture_default_str();
  eval_cmd->add_flag("--two_class", eval_opts.two_class, "merge occlusion into non-face");
  eval_cmd->add_option("--out", eval_out, "metrics CSV (stdout when absent)");

  // gradcheck
  std::string gc_loss = "consensus";
  std::uint64_t gc_seed = 1;
  int gc_instances = 50, gc_classes = 3, gc_size = 8, gc_max_blobs = 6;
  double gc_alpha = 10.0, gc_beta = 5.0;
  GradcheckOptions gc_opts{.step = 1e-5, .tolerance = 1e-4, .magnitude_floor = 1e-8};
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of a loss gradient");
  add_config_option(gc);
  gc->add_option("--loss", gc_loss, "pixelwise | blob_marginalized | consensus")->capture_default_str();
  gc->add_option("--seed", gc_seed)->capture_default_str();
  gc->add_option("--instances", gc_instances)->capture_default_str();
  gc->add_option("--classes", gc_classes)->capture_default_str();
  gc->add_option("--size", gc_size)->capture_default_str();
  gc->add_option("--max_blobs", gc_max_blobs)->capture_default_str();
  gc->add_option("--alpha", gc_alpha)->capture_default_str();
  gc->add_option("--beta", gc_beta)->capture_default_str();
  gc->add_option("--step", gc_opts.step)->capture_default_str();
  gc->add_option("--tolerance", gc_opts.tolerance)->capture_default_str();
  gc->add_option("--floor", gc_opts.magnitude_floor)->capture_default_str();

  // rf / shapes
  std::string rf_desc, rf_builtin = "appendix";
  int rf_classes = 3;
  auto* rf = app.add_subcommand("rf", "receptive field per layer");
  add_config_option(rf);
  rf->add_option("--descriptor", rf_desc, "descriptor file (overrides --builtin)");
  rf->add_option("--builtin", rf_builtin, "appendix | desk")->capture_default_str();
  rf->add_option("--classes", rf_classes, "classes of the desk stack")->capture_default_str();

  std::string sh_desc, sh_builtin = "appendix", sh_input = "3,128,128";
  int sh_classes = 3;
  auto* shapes = app.add_subcommand("shapes", "output shape and parameters per layer");
  add_config_option(shapes);
  shapes->add_option("--descriptor", sh_desc, "descriptor file (overrides --builtin)");
  shapes->add_option("--builtin", sh_builtin, "appendix | desk")->capture_default_str();
  shapes->add_option("--classes", sh_classes, "classes of the desk stack")->capture_default_str();
  shapes->add_option("--input", sh_input, "C,H,W")->capture_default_str();

  try {
    app.parse(argc, argv);
    for (CLI::App* sub : app.get_subcommands()) apply_config(sub);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error=usage " << e.what() << '\n';
    return kUsageExit;
  } catch (const Error& e) {
    std::cerr << "error=" << category_name(e.category()) << ' ' << e.what() << '\n';
    return exit_code(e.category());
  }

  try {
    if (*synth) {
      const ExperimentConfig cfg = synth_flags.resolve();
      synth_generate(cfg, synth_out);
      std::cout << "wrote " << cfg.train_count << '/' << cfg.val_count << '/' << cfg.test_count << " scenes to "
                << synth_out << '\n';
    } else if (*pipeline) {
      if (full_path.empty() == pose_path.empty()) {
        std::cerr << "error=usage exactly one of --full or --pose is required\n";
        return kUsageExit;
      }
      const BinaryMask teacher = load_mask(teacher_path);
      const BinaryMask full = full_path.empty()
                                  ? full_face_mask(load_pose_file(pose_path), teacher.height(), teacher.width())
                                  : load_mask(full_path);
      const SynthesizedLabels out = pipeline_run(full, teacher, kernels);
      save_labels(labels_out, out.labels);
      save_blobs(blobs_out, out.blobs);
      std::cout << "blobs=" << out.blobs.blob_count() << '\n';
    } else if (*train_cmd) {
      const ExperimentConfig cfg = train_flags.resolve();
      const TrainResult r = train(cfg, train_data, train_run);
      std::cout << "best_epoch=" << r.best_epoch << " best_val_mean_recall=" << r.best_val_recall << '\n';
    } else if (*eval_cmd) {
      const MetricsRow row = evaluate(eval_opts);
      const int k = eval_opts.two_class ? 2 : 3;
      std::ostringstream csv;
      write_metrics_header(csv, k);
      write_metrics_row(csv, row);
      if (eval_out.empty()) {
        std::cout << csv.str();
      } else {
        write_file(eval_out, csv.str());
      }
    } else if (*gc) {
      const LossKind kind = parse_loss_kind(gc_loss);
      LossConfig lc;
      lc.alpha = gc_alpha;
      lc.beta = gc_beta;
      lc.num_classes = gc_classes;
      lc.validate();
      if (gc_instances <= 0 || gc_size <= 0 || gc_max_blobs <= 0 || gc_max_blobs > gc_size * gc_size) {
        fail(ErrorCategory::kInvalidArgument, "instances, size and max_blobs must be positive");
      }
      std::mt19937_64 rng(gc_seed);
      double worst = 0.0;
      int failed = 0;
      for (int t = 0; t < gc_instances; ++t) {
        const Instance inst = random_instance(rng, gc_classes, gc_size, uniform_int(rng, 1, gc_max_blobs));
        const auto loss = [&](const Tensor& z) {
          switch (kind) {
            case LossKind::kPixelwise: return pixelwise_ce(z, inst.labels, lc);
            case LossKind::kBlobMarginalized: return blob_marginalized_ce(z, inst.labels, inst.blobs, lc);
            case LossKind::kConsensus: break;
          }
          return consensus_loss(z, inst.labels, inst.blobs, lc);
        };
        const GradcheckReport rep = gradcheck(loss, inst.logits, gc_opts);
        worst = std::max(worst, rep.max_relative_error);
        if (!rep.passed()) ++failed;
      }
      std::printf("loss=%s instances=%d max_relative_error=%.3e tolerance=%.1e failed=%d\n", gc_loss.c_str(),
                  gc_instances, worst, gc_opts.tolerance, failed);
      if (failed > 0) {
        std::cerr << "error=gradient-mismatch " << failed << " of " << gc_instances << " instances\n";
        return kCheckFailedExit;
      }
    } else if (*rf) {
      const auto layers = pick_descriptor(rf_desc, rf_builtin, rf_classes);
      const auto fields = receptive_field(layers);
      std::printf("layer,kind,rf,jump\n");
      for (std::size_t i = 0; i < layers.size(); ++i) {
        std::printf("%zu,%s,%g,%g\n", i + 1, std::string(kind_name(layers[i].kind)).c_str(), fields[i].rf,
                    fields[i].jump);
      }
      std::printf("receptive_field=%g\n", fields.empty() ? 1.0 : fields.back().rf);
    } else if (*shapes) {
      const auto layers = pick_descriptor(sh_desc, sh_builtin, sh_classes);
      const auto out = shape_check(layers, parse_shape(sh_input));
      std::printf("layer,kind,channels,height,width,params\n");
      for (std::size_t i = 0; i < layers.size(); ++i) {
        std::printf("%zu,%s,%d,%d,%d,%lld\n", i + 1, std::string(kind_name(layers[i].kind)).c_str(), out[i][0],
                    out[i][1], out[i][2], static_cast<long long>(layers[i].parameter_count()));
      }
      std::printf("total_params=%lld\n", static_cast<long long>(parameter_count(layers)));
    }
  } catch (const Error& e) {
    std::cerr << "error=" << category_name(e.category()) << ' ' << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error=internal " << e.what() << '\n';
    return 1;
  }
  return 0;
}

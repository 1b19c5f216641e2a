// Command-line front end: lapgsr <synth|pyramid|train|eval|infer|report|grid> [flags]

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lapgsr/checkpoint.hpp"
#include "lapgsr/data_io.hpp"
#include "lapgsr/error.hpp"
#include "lapgsr/image.hpp"
#include "lapgsr/kernels/kernels.hpp"
#include "lapgsr/metrics.hpp"
#include "lapgsr/model.hpp"
#include "lapgsr/ops.hpp"
#include "lapgsr/pyramid.hpp"
#include "lapgsr/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lapgsr;

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

json sidecar(const std::string& command, const json& config) {
  return json{{"command", command}, {"config", config}};
}

void print_resolved(const json& config) { std::cout << "resolved config: " << config.dump() << '\n'; }

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

std::vector<int64_t> parse_triple(const std::string& text, const char* flag) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + ": '" + text + "' is not a comma-separated integer list");
    }
  }
  if (out.size() != 3) throw ConfigError(std::string(flag) + " expects three values (ltb,mtb,htb)");
  return out;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) ids.push_back(item);
  }
  if (ids.empty()) throw ConfigError("--ids: no ids given");
  return ids;
}

// Maps the observed [min, max] of a band onto [0, 1] for display; a flat band
// becomes mid-gray.
Tensor band_to_image(const Tensor& band) {
  const auto src = band.data();
  const auto [lo, hi] = std::ranges::minmax(src);
  Tensor out(band.shape(), 0.5f);
  if (hi - lo > 1e-12f) {
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - lo) / (hi - lo);
  }
  return out;
}

struct Model {
  std::unique_ptr<Generator> generator;
  std::unique_ptr<SuperResolver> resolver;
  int64_t channels = 1;
};

// "bicubic" and "oracle" select the reference resolvers instead of a checkpoint.
Model load_model(const std::string& ckpt, GuideMode fallback) {
  Model m;
  if (ckpt == "bicubic") {
    m.resolver = std::make_unique<BicubicResolver>();
    m.channels = fallback == GuideMode::kGrayscale ? 1 : 3;
  } else if (ckpt == "oracle") {
    m.resolver = std::make_unique<OracleResolver>();
    m.channels = fallback == GuideMode::kGrayscale ? 1 : 3;
  } else {
    m.generator = std::make_unique<Generator>(load_generator(ckpt));
    m.resolver = std::make_unique<GeneratorResolver>(*m.generator);
    m.channels = m.generator->config().channels;
  }
  return m;
}

GuideMode mode_for_channels(int64_t channels) {
  return channels == 3 ? GuideMode::kColor : GuideMode::kGrayscale;
}

struct SynthArgs {
  SynthOptions opts;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  const json config{{"n", a.opts.count},
                    {"seed", a.opts.seed},
                    {"out", a.out},
                    {"width", a.opts.width},
                    {"height", a.opts.height},
                    {"val_fraction", a.opts.val_fraction},
                    {"test_fraction", a.opts.test_fraction}};
  print_resolved(config);
  const fs::path manifest = synth_generate(a.opts, a.out);
  write_json(fs::path(a.out) / "run.json", sidecar("synth", config));
  std::cout << manifest.string() << '\n';
  return 0;
}

struct PyramidArgs {
  std::string image;
  std::string thermal;
  std::string out;
  std::string mode = "gray";
};

int run_pyramid(const PyramidArgs& a) {
  const GuideMode mode = parse_guide_mode(a.mode);
  const json config{{"image", a.image}, {"thermal", a.thermal}, {"out", a.out},
                    {"mode", guide_mode_name(mode)}, {"seed", nullptr}};
  print_resolved(config);
  Tensor guide = decode_image(a.image);
  if (mode == GuideMode::kGrayscale && guide.shape().c == 3) guide = grayscale(guide);
  Tape tape(Tape::Mode::kInference);
  const LaplacianPyramid pyr = decompose(tape, guide);
  const fs::path out(a.out);
  std::vector<fs::path> written{out / "band_fine.png", out / "band_mid.png", out / "residual.png"};
  encode_image(written[0], band_to_image(pyr.band_fine));
  encode_image(written[1], band_to_image(pyr.band_mid));
  encode_image(written[2], pyr.residual);
  if (!a.thermal.empty()) {
    Tensor thermal = decode_image(a.thermal);
    if (thermal.shape().c != guide.shape().c) {
      if (thermal.shape().c == 3) {
        thermal = grayscale(thermal);
      } else {
        throw ShapeError("--thermal has " + std::to_string(thermal.shape().c) +
                         " channels but the guide has " + std::to_string(guide.shape().c));
      }
    }
    const PyramidLevels levels = build_modified_pyramid(guide, thermal);
    written.push_back(out / "modified_l3.png");
    written.push_back(out / "modified_l2.png");
    written.push_back(out / "modified_l1.png");
    encode_image(written[3], band_to_image(levels.l3));
    encode_image(written[4], band_to_image(levels.l2));
    encode_image(written[5], levels.l1);
  }
  write_json(out / "run.json", sidecar("pyramid", config));
  for (const auto& p : written) std::cout << p.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  std::optional<double> lambda, lr_g, lr_d, flip_prob, shift_limit;
  std::optional<int64_t> batch, epochs, checkpoint_every;
  std::optional<uint64_t> seed;
  std::optional<std::string> gan_variant, mode;
};

int run_train(const TrainArgs& a, int threads) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = parse_json_file(a.config).get<TrainConfig>();
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.lr_g) cfg.lr_g = *a.lr_g;
  if (a.lr_d) cfg.lr_d = *a.lr_d;
  if (a.flip_prob) cfg.flip_prob = *a.flip_prob;
  if (a.shift_limit) cfg.shift_limit = *a.shift_limit;
  if (a.batch) cfg.batch = *a.batch;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
  if (a.seed) cfg.seed = *a.seed;
  if (a.gan_variant) cfg.gan_variant = parse_gan_variant(*a.gan_variant);
  if (a.mode) {
    cfg.guide_mode = parse_guide_mode(*a.mode);
    cfg.generator.channels = cfg.guide_mode == GuideMode::kGrayscale ? 1 : 3;
  }
  if (threads > 0) cfg.threads = threads;
  cfg.validate();
  const json resolved = cfg;
  print_resolved(resolved);
  std::cout << "seed: " << cfg.seed << '\n';

  const DatasetSplit data = load_dataset(a.data, cfg.guide_mode);
  std::cout << "data: " << data.train.size() << " train, " << data.val.size() << " val, "
            << data.test.size() << " test\n";
  const fs::path out(a.out);
  write_json(out / "run.json", sidecar("train", json{{"train_config", resolved},
                                                    {"data", a.data},
                                                    {"resume", a.resume}}));
  TrainOptions options;
  options.out_dir = out;
  if (!a.resume.empty()) options.resume = fs::path(a.resume);
  options.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %lld step %lld l_mse %.6g l_g_adv %.4g l_d %.4g val_psnr %s val_ssim %.4f\n",
                static_cast<long long>(r.epoch), static_cast<long long>(r.step), r.losses.l_mse,
                r.losses.l_g_adv, r.losses.l_d, format_psnr(r.val_psnr).c_str(), r.val_ssim);
    std::fflush(stdout);
  };
  const TrainSummary summary = train_loop(data, cfg, options);
  std::cout << "best checkpoint: " << summary.best_checkpoint.string() << '\n';
  if (!summary.last_checkpoint.empty()) std::cout << "last checkpoint: " << summary.last_checkpoint.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  std::string out = "eval";
  std::string mode = "gray";
};

int run_eval(const EvalArgs& a) {
  const Model model = load_model(a.ckpt, parse_guide_mode(a.mode));
  const GuideMode mode = mode_for_channels(model.channels);
  const json config{{"ckpt", a.ckpt}, {"data", a.data},   {"split", a.split},
                    {"out", a.out},   {"mode", guide_mode_name(mode)}, {"seed", nullptr}};
  print_resolved(config);
  const DatasetSplit data = load_dataset(a.data, mode);
  const EvalReport report = evaluate(*model.resolver, data.split(a.split), a.split, config);
  const fs::path out(a.out);
  write_report_csv(out / "report.csv", report);
  write_report_json(out / "report.json", report);
  write_json(out / "run.json", sidecar("eval", config));
  std::cout << "model " << report.model << " split " << report.split << " samples " << report.count()
            << "\nmean_psnr " << format_psnr(report.mean_psnr) << "\nmean_ssim " << report.mean_ssim
            << '\n';
  if (report.infinite_psnr > 0) {
    std::cout << report.infinite_psnr << " sample(s) with infinite PSNR excluded from the mean\n";
  }
  return 0;
}

struct InferArgs {
  std::string ckpt;
  std::string rgb;
  std::string thermal;
  std::string out;
  std::string mode = "gray";
};

int run_infer(const InferArgs& a) {
  const Model model = load_model(a.ckpt, parse_guide_mode(a.mode));
  const GuideMode mode = mode_for_channels(model.channels);
  const json config{{"ckpt", a.ckpt}, {"rgb", a.rgb}, {"thermal", a.thermal},
                    {"out", a.out},   {"mode", guide_mode_name(mode)}, {"seed", nullptr}};
  print_resolved(config);
  SamplePair sample;
  sample.id = fs::path(a.thermal).stem().string();
  sample.guide = decode_image(a.rgb);
  if (mode == GuideMode::kGrayscale && sample.guide.shape().c == 3) sample.guide = grayscale(sample.guide);
  sample.thermal_lr = decode_image(a.thermal);
  if (sample.thermal_lr.shape().c != model.channels) {
    throw ShapeError(a.thermal + " has " + std::to_string(sample.thermal_lr.shape().c) +
                     " channels; the model expects " + std::to_string(model.channels));
  }
  const Shape& g = sample.guide.shape();
  const Shape& t = sample.thermal_lr.shape();
  if (g.h != 4 * t.h || g.w != 4 * t.w) {
    throw ShapeError("guide " + std::to_string(g.w) + "x" + std::to_string(g.h) +
                     " is not exactly 4x thermal " + std::to_string(t.w) + "x" + std::to_string(t.h));
  }
  if (a.ckpt == "oracle") throw ConfigError("infer: the oracle model needs ground truth; use eval");
  const Tensor pred = model.resolver->predict(sample);
  encode_image(a.out, pred);
  fs::path side(a.out);
  side.replace_extension(".json");
  write_json(side, sidecar("infer", config));
  std::cout << a.out << " (" << pred.shape().w << "x" << pred.shape().h << ")\n";
  return 0;
}

struct ReportArgs {
  std::string config;
  int64_t hr_width = 320;
  int64_t hr_height = 240;
  std::string blocks;
  std::string widths;
  std::optional<int64_t> stem, channels;
};

int run_report(const ReportArgs& a) {
  GeneratorConfig cfg;
  if (!a.config.empty()) {
    const json j = parse_json_file(a.config);
    if (j.is_object() && j.contains("generator")) {
      cfg = j.get<TrainConfig>().generator;
    } else {
      cfg = j.get<GeneratorConfig>();
    }
  }
  if (!a.blocks.empty()) {
    const auto b = parse_triple(a.blocks, "--blocks");
    cfg.blocks_ltb = b[0];
    cfg.blocks_mtb = b[1];
    cfg.blocks_htb = b[2];
  }
  if (!a.widths.empty()) {
    const auto w = parse_triple(a.widths, "--widths");
    cfg.width_ltb = w[0];
    cfg.width_mtb = w[1];
    cfg.width_htb = w[2];
  }
  if (a.stem) cfg.stem_ltb = *a.stem;
  if (a.channels) cfg.channels = *a.channels;
  if (a.hr_width <= 0 || a.hr_height <= 0 || a.hr_width % 4 != 0 || a.hr_height % 4 != 0) {
    throw ConfigError("extents must be divisible by 4 (got " + std::to_string(a.hr_width) + "x" +
                      std::to_string(a.hr_height) + ")");
  }
  const json resolved{{"generator", cfg}, {"hr_width", a.hr_width}, {"hr_height", a.hr_height},
                      {"seed", nullptr}};
  print_resolved(resolved);
  const int64_t params = count_params(cfg);
  const FlopBreakdown f = estimate_flops_breakdown(cfg, a.hr_height, a.hr_width);
  std::printf("params %lld\n", static_cast<long long>(params));
  std::printf("gflops %.3f (ltb %.3f, mtb %.3f, htb %.3f) at %lldx%lld\n", f.total(), f.ltb, f.mtb,
              f.htb, static_cast<long long>(a.hr_width), static_cast<long long>(a.hr_height));
  return 0;
}

struct GridArgs {
  std::string ckpt;
  std::string data;
  std::string ids;
  std::string out;
  std::string split;
  std::string mode = "gray";
};

int run_grid(const GridArgs& a) {
  const Model model = load_model(a.ckpt, parse_guide_mode(a.mode));
  const GuideMode mode = mode_for_channels(model.channels);
  const auto ids = split_ids(a.ids);
  const json config{{"ckpt", a.ckpt}, {"data", a.data}, {"ids", ids}, {"split", a.split},
                    {"out", a.out},   {"mode", guide_mode_name(mode)}, {"seed", nullptr}};
  print_resolved(config);
  const fs::path root(a.data);
  const std::vector<std::string> splits =
      a.split.empty() ? std::vector<std::string>{"train", "val", "test"} : std::vector<std::string>{a.split};
  BicubicResolver bicubic;
  const fs::path out(a.out);
  for (const std::string& id : ids) {
    fs::path split_dir;
    for (const auto& s : splits) {
      if (fs::exists(root / s / "rgb" / (id + ".png"))) {
        split_dir = root / s;
        break;
      }
    }
    if (split_dir.empty()) throw IoError("grid: id '" + id + "' not found under " + root.string());
    SamplePair sample;
    sample.id = id;
    const Tensor rgb = decode_image(split_dir / "rgb" / (id + ".png"));
    sample.guide = mode == GuideMode::kGrayscale && rgb.shape().c == 3 ? grayscale(rgb) : rgb;
    sample.thermal_lr = decode_image(split_dir / "thermal_lr" / (id + ".png"));
    sample.thermal_hr = decode_image(split_dir / "thermal_hr" / (id + ".png"));
    if (sample.thermal_hr.shape().c != model.channels || sample.thermal_lr.shape().c != model.channels) {
      throw ShapeError("grid: thermal images of '" + id + "' do not have " +
                       std::to_string(model.channels) + " channel(s)");
    }
    const Tensor pred = model.resolver->predict(sample);
    const Tensor base = bicubic.predict(sample);
    const Tensor strip = image::hconcat({image::to_rgb(rgb), image::to_rgb(sample.thermal_hr),
                                         image::to_rgb(pred), image::to_rgb(base)});
    const fs::path path = out / (id + "_grid.png");
    encode_image(path, strip);
    std::cout << path.string() << '\n';
  }
  write_json(out / "run.json", sidecar("grid", config));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplacian-pyramid guided thermal super-resolution"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads for the kernels (0 = OpenMP default)")
      ->check(CLI::NonNegativeNumber);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a procedural RGB/thermal corpus");
  c_synth->add_option("--n", synth.opts.count, "Number of samples")->capture_default_str();
  c_synth->add_option("--seed", synth.opts.seed, "Random seed")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--width", synth.opts.width, "HR width")->capture_default_str();
  c_synth->add_option("--height", synth.opts.height, "HR height")->capture_default_str();
  c_synth->add_option("--val-fraction", synth.opts.val_fraction)->capture_default_str();
  c_synth->add_option("--test-fraction", synth.opts.test_fraction)->capture_default_str();

  PyramidArgs pyr;
  auto* c_pyr = app.add_subcommand("pyramid", "Write Laplacian pyramid panels");
  c_pyr->add_option("--image", pyr.image, "Guide image")->required();
  c_pyr->add_option("--thermal", pyr.thermal, "Low-resolution thermal image for the modified pyramid");
  c_pyr->add_option("--out", pyr.out, "Output directory")->required();
  c_pyr->add_option("--mode", pyr.mode, "gray or color")->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a generator");
  c_train->add_option("--config", train.config, "TrainConfig JSON (flags override it)");
  c_train->add_option("--data", train.data, "Dataset root")->required();
  c_train->add_option("--out", train.out, "Run directory")->required();
  c_train->add_option("--resume", train.resume, "Trainer state manifest to resume from");
  c_train->add_option("--lambda", train.lambda);
  c_train->add_option("--lr-g", train.lr_g);
  c_train->add_option("--lr-d", train.lr_d);
  c_train->add_option("--batch", train.batch);
  c_train->add_option("--epochs", train.epochs);
  c_train->add_option("--seed", train.seed);
  c_train->add_option("--flip-prob", train.flip_prob);
  c_train->add_option("--shift-limit", train.shift_limit);
  c_train->add_option("--gan-variant", train.gan_variant);
  c_train->add_option("--checkpoint-every", train.checkpoint_every);
  c_train->add_option("--mode", train.mode, "gray or color");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint (or 'bicubic'/'oracle') on a split");
  c_eval->add_option("--ckpt", ev.ckpt, "Generator manifest, 'bicubic' or 'oracle'")->required();
  c_eval->add_option("--data", ev.data, "Dataset root")->required();
  c_eval->add_option("--split", ev.split)->capture_default_str();
  c_eval->add_option("--out", ev.out, "Report directory")->capture_default_str();
  c_eval->add_option("--mode", ev.mode, "Guide mode for 'bicubic'/'oracle'")->capture_default_str();

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Super-resolve one thermal image");
  c_inf->add_option("--ckpt", inf.ckpt, "Generator manifest or 'bicubic'")->required();
  c_inf->add_option("--rgb", inf.rgb, "High-resolution guide")->required();
  c_inf->add_option("--thermal", inf.thermal, "Low-resolution thermal image")->required();
  c_inf->add_option("--out", inf.out, "Output PNG")->required();
  c_inf->add_option("--mode", inf.mode, "Guide mode for 'bicubic'")->capture_default_str();

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Print parameter count and GFLOPs");
  c_rep->add_option("--config", rep.config, "TrainConfig or GeneratorConfig JSON");
  c_rep->add_option("--hr-width", rep.hr_width)->capture_default_str();
  c_rep->add_option("--hr-height", rep.hr_height)->capture_default_str();
  c_rep->add_option("--blocks", rep.blocks, "Residual blocks per branch, e.g. 2,3,3");
  c_rep->add_option("--widths", rep.widths, "Branch widths, e.g. 64,64,12");
  c_rep->add_option("--stem", rep.stem, "Low-branch stem width (0 = none)");
  c_rep->add_option("--channels", rep.channels);

  GridArgs grid;
  auto* c_grid = app.add_subcommand("grid", "Write RGB | truth | prediction | bicubic strips");
  c_grid->add_option("--ckpt", grid.ckpt, "Generator manifest or 'bicubic'")->required();
  c_grid->add_option("--data", grid.data, "Dataset root")->required();
  c_grid->add_option("--ids", grid.ids, "Comma-separated sample ids")->required();
  c_grid->add_option("--out", grid.out, "Output directory")->required();
  c_grid->add_option("--split", grid.split, "Restrict the id lookup to one split");
  c_grid->add_option("--mode", grid.mode, "Guide mode for 'bicubic'")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (threads > 0) kernels::set_num_threads(threads);
    if (c_synth->parsed()) return run_synth(synth);
    if (c_pyr->parsed()) return run_pyramid(pyr);
    if (c_train->parsed()) return run_train(train, threads);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_inf->parsed()) return run_infer(inf);
    if (c_rep->parsed()) return run_report(rep);
    if (c_grid->parsed()) return run_grid(grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

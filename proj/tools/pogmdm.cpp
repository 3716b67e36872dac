#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "CLI11.hpp"
#include "pogmdm/config.hpp"
#include "pogmdm/errors.hpp"
#include "pogmdm/metrics.hpp"
#include "pogmdm/model_io.hpp"
#include "pogmdm/npy.hpp"
#include "pogmdm/recon.hpp"
#include "pogmdm/synth.hpp"
#include "pogmdm/training.hpp"

namespace fs = std::filesystem;
using namespace pogmdm;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::uint64_t seed{0};
  bool seed_given{false};

  AppConfig load() const {
    AppConfig c = config_path.empty() ? AppConfig{} : load_config(config_path);
    if (seed_given) {
      c.train.seed = seed;
      c.recon.seed = seed;
    }
    return c;
  }
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&common](const std::uint64_t& s) {
        common.seed = s;
        common.seed_given = true;
      },
      "random seed (overrides the config)");
}

std::ofstream open_csv(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.precision(10);
  return out;
}

void write_trace(const std::string& path, const std::vector<TraceEntry>& trace) {
  std::ofstream out = open_csv(path);
  out << "step,zeta,data_fidelity,prior_energy\n";
  for (const auto& e : trace) out << e.step << ',' << e.zeta << ',' << e.data_fidelity << ',' << e.prior_energy << '\n';
}

void report(const char* label, const Image& x, const Image& ref) {
  const MetricsReport m = evaluate(x, ref);
  std::fprintf(stderr, "%s: PSNR %.2f dB  SSIM %.4f  NMSE(x100) %.4f\n", label, m.psnr_db, m.ssim, 100.0 * m.nmse);
}

KSpaceData read_kspace(const std::string& path) { return read_complex_stack(path); }

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string out;
  std::string init;
  std::string log_csv;
  std::string checkpoint_dir;
  std::uint64_t iterations{0};
};

int run_train(const Common& common, const TrainArgs& args) {
  AppConfig cfg = common.load();
  if (args.iterations > 0) cfg.train.iterations = args.iterations;
  const std::vector<Image> data = read_corpus(args.data_dir);
  PoGmdm init;
  if (!args.init.empty()) {
    init = load_model(args.init);
  } else {
    std::mt19937_64 rng(cfg.train.seed);
    ModelSpec spec = cfg.model;
    spec.image_shape = Shape{cfg.train.patch_size, cfg.train.patch_size};
    init = make_model(spec, rng);
  }
  std::fprintf(stderr, "training %zu parameters on %zu images\n", count_parameters(init), data.size());

  std::ofstream log;
  if (!args.log_csv.empty()) {
    log = open_csv(args.log_csv);
    log << "iteration,loss,wall_seconds\n";
  }
  if (!args.checkpoint_dir.empty()) fs::create_directories(args.checkpoint_dir);
  const TrainResult result = train(data, init, cfg.train, [&](const LossRecord& rec, const PoGmdm& ema) {
    std::fprintf(stderr, "iter %llu  loss %.6g  %.1fs\n", static_cast<unsigned long long>(rec.iteration), rec.loss,
                 rec.wall_seconds);
    if (log) log << rec.iteration << ',' << rec.loss << ',' << rec.wall_seconds << '\n' << std::flush;
    if (!args.checkpoint_dir.empty()) {
      char name[48];
      std::snprintf(name, sizeof(name), "model_%08llu.json", static_cast<unsigned long long>(rec.iteration));
      save_model((fs::path(args.checkpoint_dir) / name).string(), ema);
    }
  });
  save_model(args.out, result.model);
  std::fprintf(stderr, "wrote %s\n", args.out.c_str());
  return 0;
}

// --- denoise ---------------------------------------------------------------

struct DenoiseArgs {
  std::string model;
  std::string input;
  std::string out;
  std::string reference;
  std::string noisy_out;
  double sigma{-1.0};
  bool add_noise{false};
};

int run_denoise(const Common& common, const DenoiseArgs& args) {
  const AppConfig cfg = common.load();
  const PoGmdm model = load_model(args.model);
  const double sigma = args.sigma >= 0.0 ? args.sigma : cfg.data.denoise_sigma;
  if (!(sigma > 0.0)) throw std::invalid_argument("denoise: sigma must be > 0");
  Image y = read_image(args.input);
  if (args.add_noise) {
    std::mt19937_64 rng(common.seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& v : y) v += normal(rng);
    if (!args.noisy_out.empty()) write_npy(args.noisy_out, y);
  }
  const Image x = denoise_tweedie(model, y, sigma * sigma);
  write_npy(args.out, x);
  if (!args.reference.empty()) {
    const Image ref = read_image(args.reference);
    report("noisy", y, ref);
    report("denoised", x, ref);
  }
  return 0;
}

// --- reconstruction --------------------------------------------------------

struct ReconArgs {
  std::string model;
  std::string kspace;
  std::string mask;
  std::string out;
  std::string reference;
  std::string trace;
  std::string coils_out;
  std::string complex_out;
  std::string variance_out;
  std::size_t repeats{0};
  std::size_t threads{0};
};

int run_recon_single(const Common& common, const ReconArgs& args) {
  const AppConfig cfg = common.load();
  const PoGmdm model = load_model(args.model);
  const KSpaceData y = read_kspace(args.kspace);
  const Image mask = read_image(args.mask);
  const Image x = single_coil_reconstruct(y, mask, model, cfg.recon);
  write_npy(args.out, x);
  if (!args.reference.empty()) {
    const Image ref = read_image(args.reference);
    report("zero-filled", real_part(zero_filled(y)[0]), ref);
    report("reconstruction", x, ref);
  }
  return 0;
}

int run_recon_pi(const Common& common, const ReconArgs& args) {
  AppConfig cfg = common.load();
  if (args.threads > 0) cfg.recon.threads = args.threads;
  const std::size_t repeats = args.repeats > 0 ? args.repeats : cfg.recon.repeats;
  const PoGmdm model = load_model(args.model);
  SenseProblem problem;
  problem.y = read_kspace(args.kspace);
  problem.mask = read_image(args.mask);
  problem.noise_sigma = cfg.data.kspace_noise;

  Image out;
  if (repeats > 1) {
    if (!args.trace.empty() || !args.coils_out.empty() || !args.complex_out.empty()) {
      std::fprintf(stderr, "note: --trace, --coils-out and --complex-out need --repeats 1; ignored\n");
    }
    const MmseResult mmse = mmse_average(problem, model, cfg.recon, repeats);
    out = mmse.mean;
    if (!args.variance_out.empty()) write_npy(args.variance_out, mmse.variance);
  } else {
    const ReconResult r = joint_reconstruct(problem, model, cfg.recon);
    const ComplexImage corrected = intensity_correction(r.image, r.coils);
    out = magnitude(corrected);
    if (!args.complex_out.empty()) write_npy(args.complex_out, corrected);
    if (!args.coils_out.empty()) write_npy(args.coils_out, r.coils);
    if (!args.trace.empty()) write_trace(args.trace, r.trace);
    if (!args.variance_out.empty()) write_npy(args.variance_out, Image(out.shape()));
  }
  write_npy(args.out, out);
  if (!args.reference.empty()) {
    const Image ref = read_image(args.reference);
    report("zero-filled RSS", rss(zero_filled(problem.y)), ref);
    report("reconstruction", out, ref);
  }
  return 0;
}

// --- masks and synthetic data ----------------------------------------------

struct MaskArgs {
  std::string out;
  std::string kind;
  double acceleration{0.0};
  double acl{-1.0};
  bool rotated{false};
  std::vector<std::size_t> size;
};

int run_sample_mask(const Common& common, const MaskArgs& args) {
  const AppConfig cfg = common.load();
  const MaskKind kind = args.kind.empty() ? cfg.mask.kind : mask_kind_from_string(args.kind);
  const double acc = args.acceleration > 0.0 ? args.acceleration : cfg.mask.acceleration;
  const double acl = args.acl >= 0.0 ? args.acl : cfg.mask.acl_fraction;
  Shape shape{cfg.data.image_size, cfg.data.image_size};
  if (args.size.size() == 1) shape = Shape{args.size[0], args.size[0]};
  if (args.size.size() == 2) shape = Shape{args.size[0], args.size[1]};
  const SamplingMask m = make_mask(kind, shape, acc, acl, args.rotated || cfg.mask.rotated, common.seed);
  write_npy(args.out, m.mask);
  std::fprintf(stderr, "%s mask %s, sampled fraction %.4f\n", to_string(kind).c_str(), to_string(shape).c_str(),
               m.sampled_fraction());
  return 0;
}

struct SynthArgs {
  std::string out;
  std::size_t size{0};
  std::size_t coils{0};
  std::size_t count{0};
  std::string image;
  std::string coil_maps;
  std::string mask;
  double noise{-1.0};
};

int run_synth(const std::string& what, const Common& common, const SynthArgs& args) {
  const AppConfig cfg = common.load();
  const std::size_t n = args.size > 0 ? args.size : cfg.data.image_size;
  if (what == "phantom") {
    write_npy(args.out, shepp_logan(n));
  } else if (what == "coils") {
    write_npy(args.out, synthetic_coils(args.coils > 0 ? args.coils : cfg.data.coils, n, common.seed));
  } else if (what == "corpus") {
    const auto images = corpus_generate(args.count > 0 ? args.count : cfg.data.corpus_count, n, common.seed);
    write_corpus(args.out, images);
  } else if (what == "kspace") {
    const ComplexImage x = read_complex_image(args.image);
    const CoilSensitivities s = args.coil_maps.empty() ? CoilSensitivities{ComplexImage(x.shape(), complex{1.0, 0.0})}
                                                       : read_complex_stack(args.coil_maps);
    const Image mask = read_image(args.mask);
    std::mt19937_64 rng(common.seed);
    write_npy(args.out, simulate_kspace(x, s, mask, args.noise >= 0.0 ? args.noise : cfg.data.kspace_noise, rng));
  }
  std::fprintf(stderr, "wrote %s\n", args.out.c_str());
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string reference;
  std::vector<std::string> inputs;
  std::string out;
  std::size_t threads{1};
};

int run_eval(const Common&, const EvalArgs& args) {
  const Image ref = read_image(args.reference);
  std::vector<MetricsReport> reports(args.inputs.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(std::max<std::size_t>(args.threads, 1));
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = next++; i < args.inputs.size(); i = next++) {
        reports[i] = evaluate(read_image(args.inputs[i]), ref);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < errors.size(); ++w) pool.emplace_back(work, w);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ofstream csv;
  if (!args.out.empty()) {
    csv = open_csv(args.out);
    csv << "file,psnr_db,ssim,nmse_x100\n";
  }
  std::vector<double> p, s, n;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    p.push_back(r.psnr_db);
    s.push_back(r.ssim);
    n.push_back(100.0 * r.nmse);
    if (csv) csv << args.inputs[i] << ',' << r.psnr_db << ',' << r.ssim << ',' << 100.0 * r.nmse << '\n';
    std::printf("%s  PSNR %.2f  SSIM %.4f  NMSE(x100) %.4f\n", args.inputs[i].c_str(), r.psnr_db, r.ssim, 100.0 * r.nmse);
  }
  const MeanStd mp = mean_std(p), ms = mean_std(s), mn = mean_std(n);
  std::printf("mean  PSNR %.2f +- %.2f  SSIM %.4f +- %.4f  NMSE(x100) %.4f +- %.4f\n", mp.mean, mp.std, ms.mean, ms.std,
              mn.mean, mn.std);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Product-of-Gaussian-mixture diffusion prior: training, denoising and MRI reconstruction"};
  app.require_subcommand(1);
  Common common;
  int status = 0;

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model by denoising score matching");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", train_args.data_dir, "corpus directory with index.txt")->required();
  train_cmd->add_option("--out", train_args.out, "output model file")->required();
  train_cmd->add_option("--init", train_args.init, "start from this model instead of a random one");
  train_cmd->add_option("--log", train_args.log_csv, "loss log CSV");
  train_cmd->add_option("--checkpoints", train_args.checkpoint_dir, "write the EMA model here at every log step");
  train_cmd->add_option("--iterations", train_args.iterations, "override train.iterations");
  train_cmd->callback([&] { status = run_train(common, train_args); });

  DenoiseArgs denoise_args;
  auto* denoise_cmd = app.add_subcommand("denoise", "one-step empirical Bayes denoising");
  add_common(denoise_cmd, common);
  denoise_cmd->add_option("--model", denoise_args.model)->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--input", denoise_args.input, "noisy image (.npy)")->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--out", denoise_args.out)->required();
  denoise_cmd->add_option("--sigma", denoise_args.sigma, "noise standard deviation (default data.denoise_sigma)");
  denoise_cmd->add_flag("--add-noise", denoise_args.add_noise, "treat the input as clean and add noise first");
  denoise_cmd->add_option("--noisy-out", denoise_args.noisy_out, "where to save the synthesized noisy image");
  denoise_cmd->add_option("--reference", denoise_args.reference, "clean image for PSNR/SSIM/NMSE");
  denoise_cmd->callback([&] { status = run_denoise(common, denoise_args); });

  ReconArgs single_args;
  auto* single_cmd = app.add_subcommand("recon-single", "single-coil reconstruction with s = 1");
  add_common(single_cmd, common);
  single_cmd->add_option("--model", single_args.model)->required()->check(CLI::ExistingFile);
  single_cmd->add_option("--kspace", single_args.kspace, "(1, H, W) complex k-space")->required()->check(CLI::ExistingFile);
  single_cmd->add_option("--mask", single_args.mask)->required()->check(CLI::ExistingFile);
  single_cmd->add_option("--out", single_args.out)->required();
  single_cmd->add_option("--reference", single_args.reference);
  single_cmd->callback([&] { status = run_recon_single(common, single_args); });

  ReconArgs pi_args;
  auto* pi_cmd = app.add_subcommand("recon-pi", "joint image and coil sensitivity reconstruction");
  add_common(pi_cmd, common);
  pi_cmd->add_option("--model", pi_args.model)->required()->check(CLI::ExistingFile);
  pi_cmd->add_option("--kspace", pi_args.kspace, "(c, H, W) complex k-space")->required()->check(CLI::ExistingFile);
  pi_cmd->add_option("--mask", pi_args.mask)->required()->check(CLI::ExistingFile);
  pi_cmd->add_option("--out", pi_args.out, "intensity-corrected magnitude (MMSE mean if repeats > 1)")->required();
  pi_cmd->add_option("--repeats", pi_args.repeats, "K reconstructions to average (default recon.repeats)");
  pi_cmd->add_option("--threads", pi_args.threads, "worker threads for the repeats");
  pi_cmd->add_option("--variance-out", pi_args.variance_out);
  pi_cmd->add_option("--coils-out", pi_args.coils_out, "estimated sensitivities (repeats = 1)");
  pi_cmd->add_option("--complex-out", pi_args.complex_out, "complex reconstruction (repeats = 1)");
  pi_cmd->add_option("--trace", pi_args.trace, "per-step trace CSV (repeats = 1)");
  pi_cmd->add_option("--reference", pi_args.reference);
  pi_cmd->callback([&] { status = run_recon_pi(common, pi_args); });

  MaskArgs mask_args;
  auto* mask_cmd = app.add_subcommand("sample-mask", "generate a k-space sampling mask");
  add_common(mask_cmd, common);
  mask_cmd->add_option("--out", mask_args.out)->required();
  mask_cmd->add_option("--kind", mask_args.kind, "cartesian, radial, spiral or gaussian2d");
  mask_cmd->add_option("--acceleration", mask_args.acceleration);
  mask_cmd->add_option("--acl", mask_args.acl, "auto-calibration fraction");
  mask_cmd->add_flag("--rotated", mask_args.rotated);
  mask_cmd->add_option("--size", mask_args.size, "N or H W")->expected(1, 2);
  mask_cmd->callback([&] { status = run_sample_mask(common, mask_args); });

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "synthetic data");
  synth_cmd->require_subcommand(1);
  for (const char* what : {"phantom", "coils", "corpus", "kspace"}) {
    auto* sub = synth_cmd->add_subcommand(what);
    add_common(sub, common);
    sub->add_option("--out", synth_args.out, std::string(what) == "corpus" ? "output directory" : "output .npy")->required();
    if (std::string(what) != "kspace") sub->add_option("--size", synth_args.size, "image side length");
    if (std::string(what) == "coils") sub->add_option("--coils", synth_args.coils);
    if (std::string(what) == "corpus") sub->add_option("--count", synth_args.count);
    if (std::string(what) == "kspace") {
      sub->add_option("--image", synth_args.image)->required()->check(CLI::ExistingFile);
      sub->add_option("--coil-maps", synth_args.coil_maps, "(c, H, W) sensitivities; single coil s = 1 if omitted")
          ->check(CLI::ExistingFile);
      sub->add_option("--mask", synth_args.mask)->required()->check(CLI::ExistingFile);
      sub->add_option("--noise", synth_args.noise, "std of each real/imag component (default data.kspace_noise)");
    }
    sub->callback([&, name = std::string(what)] { status = run_synth(name, common, synth_args); });
  }

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR, SSIM and NMSE against a reference");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--reference", eval_args.reference)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("inputs", eval_args.inputs, "images to score")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_args.out, "CSV report");
  eval_cmd->add_option("--threads", eval_args.threads)->check(CLI::PositiveNumber);
  eval_cmd->callback([&] { status = run_eval(common, eval_args); });

  std::string template_out;
  auto* config_cmd = app.add_subcommand("config", "write the configuration template with every default");
  config_cmd->add_option("--out", template_out, "file (stdout if omitted)");
  config_cmd->callback([&] {
    const std::string text = config_to_string(AppConfig{});
    if (template_out.empty()) {
      std::cout << text << '\n';
    } else {
      std::ofstream(template_out) << text << '\n';
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return status;
}

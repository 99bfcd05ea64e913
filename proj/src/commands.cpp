#include "confix/commands.hpp"

#include <cstdio>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "confix/error.hpp"
#include "confix/image_io.hpp"
#include "confix/metrics.hpp"
#include "confix/pipeline.hpp"
#include "confix/providers.hpp"
#include "confix/scene_io.hpp"

namespace fs = std::filesystem;

namespace confix {

namespace {

std::string numbered(const char* prefix, int id, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", prefix, id, ext);
  return buf;
}

/// Exclusive claim on an output directory for the lifetime of a command.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".confix.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw IoError("output directory is locked or not writable: " + dir.string());
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw IoError(std::string("missing ") + what + ": " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw IoError(std::string("missing ") + what + " directory: " + p.string());
}

/// Rounds every sample through float32 so fields computed in memory match
/// those read back from the float sidecars.
ImageBuffer as_float32(ImageBuffer img) {
  for (double& v : img.data()) v = static_cast<double>(static_cast<float>(v));
  return img;
}

struct Inputs {
  GaussianScene scene;
  std::vector<Camera> cameras;
};

Inputs load_inputs(const PipelineConfig& cfg) {
  require_file(cfg.scene, "scene");
  require_file(cfg.cameras, "cameras");
  Inputs in;
  in.cameras = load_cameras(cfg.cameras);
  if (in.cameras.empty()) throw ValidationError("no cameras in " + cfg.cameras.string());
  in.scene = load_initial_scene(cfg.scene);
  return in;
}

/// Ground truth for the supports (file provider) or for every view
/// (synthetic provider, which derives targets from it).
std::vector<ImageBuffer> load_ground_truth(const PipelineConfig& cfg, const std::vector<Camera>& cams) {
  require_dir(cfg.gt_dir, "ground-truth");
  if (cfg.provider == ProviderKind::Synthetic) return load_gt_images(cfg.gt_dir, cams);
  return load_gt_images(cfg.gt_dir, cams, [](const Camera& c) { return c.is_support; });
}

PseudoTargetSet load_targets(const PipelineConfig& cfg, const std::vector<Camera>& cams,
                             const std::vector<ImageBuffer>& gt, std::ostream& log) {
  if (cfg.provider == ProviderKind::Synthetic) return synthetic_oracle(gt, cams, cfg.corruption);
  require_dir(cfg.targets_dir, "pseudo-target");
  return load_pseudo_targets(cfg.targets_dir, cams, gt, [&log](const std::string& m) { log << "warning: " << m << "\n"; });
}

struct Scaffold {
  ImageBuffer alpha;
  ImageBuffer depth;
};

/// Alpha and depth of the initial scene at every view, from the render
/// cache when present.
std::vector<Scaffold> scaffold_fields(const PipelineConfig& cfg, const Inputs& in, bool allow_compute) {
  const fs::path dir = cfg.output_dir / "renders";
  std::vector<Scaffold> out;
  for (const auto& cam : in.cameras) {
    const fs::path a = dir / numbered("alpha", cam.view_id, "cfxf");
    const fs::path d = dir / numbered("depth", cam.view_id, "cfxf");
    if (fs::exists(a) && fs::exists(d)) {
      Scaffold s{read_cfxf(a), read_cfxf(d)};
      if (s.alpha.width() != cam.width || s.alpha.height() != cam.height || s.depth.width() != cam.width ||
          s.depth.height() != cam.height) {
        throw ValidationError("view " + std::to_string(cam.view_id) + ": cached render does not match camera");
      }
      out.push_back(std::move(s));
      continue;
    }
    if (!allow_compute) {
      throw IoError("view " + std::to_string(cam.view_id) + ": missing render " + a.string() + " (run render first)");
    }
    const RenderOutput r = render(in.scene, cam, cfg.repair.background, cfg.repair.raster);
    out.push_back({as_float32(r.alpha), as_float32(r.depth)});
  }
  return out;
}

std::vector<ConfidenceMap> confidence_maps(const PipelineConfig& cfg, const Inputs& in,
                                           const std::vector<ImageBuffer>& gt, const PseudoTargetSet& targets,
                                           const std::vector<Scaffold>& scaffold) {
  std::vector<SupportView> supports;
  for (std::size_t i = 0; i < in.cameras.size(); ++i) {
    if (in.cameras[i].is_support) supports.push_back({&in.cameras[i], &gt[i]});
  }
  std::vector<ConfidenceMap> maps;
  for (std::size_t i = 0; i < in.cameras.size(); ++i) {
    const Camera& cam = in.cameras[i];
    if (cam.is_support) {
      maps.push_back(support_confidence(cam.width, cam.height, cam.view_id));
      continue;
    }
    ConfidenceMap m =
        build_confidence_map(targets.targets[i], cam, scaffold[i].alpha, scaffold[i].depth, supports, cfg.repair);
    m.weights = as_float32(m.weights);
    maps.push_back(std::move(m));
  }
  return maps;
}

std::string summary_json(const std::vector<Camera>& cams, const std::vector<ConfidenceMap>& maps) {
  nlohmann::ordered_json j;
  j["views"] = nlohmann::ordered_json::array();
  double novel_sum = 0.0;
  int novels = 0;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const double m = maps[i].mean();
    j["views"].push_back({{"view_id", cams[i].view_id}, {"is_support", cams[i].is_support}, {"mean", m}});
    if (!cams[i].is_support) {
      novel_sum += m;
      ++novels;
    }
  }
  j["mean_novel"] = novels > 0 ? novel_sum / novels : 0.0;
  return j.dump(2) + "\n";
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() || base.empty() ? p : base / p; }

}  // namespace

CommandOptions make_options(const fs::path& config_path, std::optional<std::uint64_t> seed, bool uniform,
                            const std::optional<fs::path>& out_dir) {
  CommandOptions opt;
  if (!config_path.empty()) {
    opt.config = load_config(config_path);
    const fs::path base = config_path.parent_path();
    PipelineConfig& c = opt.config;
    c.scene = resolve(base, c.scene);
    c.cameras = resolve(base, c.cameras);
    c.gt_dir = resolve(base, c.gt_dir);
    c.targets_dir = resolve(base, c.targets_dir);
    c.output_dir = resolve(base, c.output_dir);
  }
  if (seed) {
    opt.config.repair.rng_seed = *seed;
    opt.config.corruption.rng_seed = *seed;
    opt.config.benchmark.seed = *seed;
  }
  if (out_dir) opt.config.output_dir = *out_dir;
  opt.uniform_confidence = uniform || opt.config.uniform_confidence;
  return opt;
}

void cmd_render(const CommandOptions& opt, std::ostream& log) {
  const PipelineConfig& cfg = opt.config;
  const Inputs in = load_inputs(cfg);
  OutputLock lock(cfg.output_dir);
  const fs::path dir = cfg.output_dir / "renders";
  fs::create_directories(dir);
  for (const auto& cam : in.cameras) {
    const RenderOutput r = render(in.scene, cam, cfg.repair.background, cfg.repair.raster);
    double max_depth = 0.0;
    for (double v : r.depth.data()) max_depth = std::max(max_depth, v);
    write_png(r.rgb, dir / numbered("rgb", cam.view_id, "png"));
    write_pgm16(r.alpha, 1.0, dir / numbered("alpha", cam.view_id, "pgm"));
    write_pgm16(r.depth, max_depth > 0.0 ? max_depth : 1.0, dir / numbered("depth", cam.view_id, "pgm"));
    write_cfxf(r.rgb, dir / numbered("rgb", cam.view_id, "cfxf"));
    write_cfxf(r.alpha, dir / numbered("alpha", cam.view_id, "cfxf"));
    write_cfxf(r.depth, dir / numbered("depth", cam.view_id, "cfxf"));
  }
  log << "rendered " << in.cameras.size() << " views into " << dir.string() << "\n";
}

void cmd_confidence(const CommandOptions& opt, std::ostream& log) {
  const PipelineConfig& cfg = opt.config;
  const Inputs in = load_inputs(cfg);
  const auto gt = load_ground_truth(cfg, in.cameras);
  const PseudoTargetSet targets = load_targets(cfg, in.cameras, gt, log);
  OutputLock lock(cfg.output_dir);
  const auto scaffold = scaffold_fields(cfg, in, false);
  const auto maps = confidence_maps(cfg, in, gt, targets, scaffold);
  const fs::path dir = cfg.output_dir / "confidence";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    write_pgm16(maps[i].weights, 1.0, dir / numbered("conf", in.cameras[i].view_id, "pgm"));
    write_cfxf(maps[i].weights, dir / numbered("conf", in.cameras[i].view_id, "cfxf"));
  }
  write_text(summary_json(in.cameras, maps), dir / "summary.json");
  log << "wrote " << maps.size() << " confidence maps into " << dir.string() << "\n";
}

void cmd_repair(const CommandOptions& opt, std::ostream& log) {
  const PipelineConfig& cfg = opt.config;
  const Inputs in = load_inputs(cfg);
  const auto gt = load_ground_truth(cfg, in.cameras);
  const PseudoTargetSet targets = load_targets(cfg, in.cameras, gt, log);
  OutputLock lock(cfg.output_dir);

  std::vector<ConfidenceMap> maps;
  if (opt.uniform_confidence) {
    for (const auto& cam : in.cameras) maps.push_back(support_confidence(cam.width, cam.height, cam.view_id));
  } else {
    const fs::path dir = cfg.output_dir / "confidence";
    bool cached = true;
    for (const auto& cam : in.cameras) cached = cached && fs::exists(dir / numbered("conf", cam.view_id, "cfxf"));
    if (cached) {
      for (const auto& cam : in.cameras) {
        ConfidenceMap m;
        m.view_id = cam.view_id;
        m.weights = read_cfxf(dir / numbered("conf", cam.view_id, "cfxf"));
        if (m.weights.width() != cam.width || m.weights.height() != cam.height || m.weights.channels() != 1) {
          throw ValidationError("view " + std::to_string(cam.view_id) + ": cached confidence does not match camera");
        }
        maps.push_back(std::move(m));
      }
    } else {
      maps = confidence_maps(cfg, in, gt, targets, scaffold_fields(cfg, in, true));
    }
  }

  const fs::path final_path = cfg.output_dir / "scene_final.ply";
  const fs::path ckpt_dir = cfg.output_dir / "checkpoints";
  StepObserver observer;
  if (cfg.checkpoint_interval > 0) {
    fs::create_directories(ckpt_dir);
    observer = [&](int step, const GaussianScene& scene) {
      if (step % cfg.checkpoint_interval != 0) return;
      char name[64];
      std::snprintf(name, sizeof name, "scene_%06d.ply", step);
      save_scene(scene, ckpt_dir / name);
    };
  }
  const RepairResult result = repair(in.scene, in.cameras, targets.targets, maps, cfg.repair, observer);
  if (cfg.repair.iterations == 0) {
    // Nothing was optimised: hand back the input file verbatim.
    fs::copy_file(cfg.scene, final_path, fs::copy_options::overwrite_existing);
  } else {
    save_scene(result.scene, final_path);
  }

  std::string csv = "step,l1,ssim,target,gt,total\n";
  char line[256];
  for (const auto& r : result.losses) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.l1, r.ssim, r.target, r.gt,
                  r.total);
    csv += line;
  }
  write_text(csv, cfg.output_dir / "loss.csv");
  std::string topo = "step,clones,splits,prunes,count\n";
  for (const auto& t : result.topology) {
    std::snprintf(line, sizeof line, "%d,%d,%d,%d,%zu\n", t.step, t.clones, t.splits, t.prunes, t.count);
    topo += line;
  }
  write_text(topo, cfg.output_dir / "topology.csv");
  log << "repaired " << in.scene.size() << " -> " << result.scene.size() << " Gaussians over "
      << cfg.repair.iterations << " steps" << (opt.uniform_confidence ? " (uniform confidence)" : "") << "\n";
}

void cmd_eval(const CommandOptions& opt, std::ostream& log) {
  const PipelineConfig& cfg = opt.config;
  require_file(cfg.cameras, "cameras");
  const fs::path final_path = cfg.output_dir / "scene_final.ply";
  require_file(final_path, "final scene");
  require_dir(cfg.gt_dir, "ground-truth");
  const auto cams = load_cameras(cfg.cameras);
  const GaussianScene scene = load_scene(final_path);
  const auto gt = load_gt_images(cfg.gt_dir, cams, [](const Camera& c) { return !c.is_support; });
  OutputLock lock(cfg.output_dir);
  const EvalReport report = evaluate_novel_views(scene, cams, gt, cfg.repair.background, cfg.repair.raster);
  write_text(report.to_csv(), cfg.output_dir / "eval.csv");
  write_text(report.to_json(), cfg.output_dir / "eval.json");
  char line[128];
  std::snprintf(line, sizeof line, "%zu views: PSNR %.4f dB, SSIM %.5f\n", report.count(), report.mean_psnr,
                report.mean_ssim);
  log << line;
}

void cmd_synth_bench(const CommandOptions& opt, std::ostream& log) {
  const PipelineConfig& cfg = opt.config;
  OutputLock lock(cfg.output_dir);
  const fs::path out = cfg.output_dir;
  const PlaneBenchmark b = make_plane_benchmark(cfg.benchmark);
  const PseudoTargetSet targets = synthetic_oracle(b.gt_images, b.cameras, cfg.corruption);

  fs::create_directories(out / "gt");
  fs::create_directories(out / "targets");
  fs::create_directories(out / "masks");
  save_scene(b.initial, out / "scene.ply");
  save_scene(b.ground_truth, out / "scene_gt.ply");
  save_cameras(b.cameras, out / "cameras.json");
  for (std::size_t i = 0; i < b.cameras.size(); ++i) {
    const int id = b.cameras[i].view_id;
    write_png(b.gt_images[i], out / "gt" / numbered("img", id, "png"));
    if (b.cameras[i].is_support) continue;
    write_png(targets.targets[i], out / "targets" / numbered("target", id, "png"));
    write_png(targets.masks[i], out / "masks" / numbered("mask", id, "png"));
  }

  const RepairConfig& rc = cfg.repair;
  const double initial = evaluate_novel_views(b.initial, b.cameras, b.gt_images, rc.background, rc.raster).mean_psnr;
  const auto weighted = compute_confidences(b.initial, b.cameras, targets.targets, b.gt_images, rc);
  const auto uniform = compute_confidences(b.initial, b.cameras, targets.targets, b.gt_images, rc, true);
  const GaussianScene ws = repair(b.initial, b.cameras, targets.targets, weighted, rc).scene;
  const GaussianScene us = repair(b.initial, b.cameras, targets.targets, uniform, rc).scene;
  const double wp = evaluate_novel_views(ws, b.cameras, b.gt_images, rc.background, rc.raster).mean_psnr;
  const double up = evaluate_novel_views(us, b.cameras, b.gt_images, rc.background, rc.raster).mean_psnr;
  save_scene(ws, out / "scene_weighted.ply");
  save_scene(us, out / "scene_uniform.ply");

  nlohmann::ordered_json j;
  j["initial_psnr"] = initial;
  j["weighted_psnr"] = wp;
  j["uniform_psnr"] = up;
  j["delta_psnr"] = wp - up;
  write_text(j.dump(2) + "\n", out / "bench.json");
  char line[160];
  std::snprintf(line, sizeof line, "held-out PSNR: initial %.3f dB, weighted %.3f dB, uniform %.3f dB, delta %+.3f dB\n",
                initial, wp, up, wp - up);
  log << line;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidence-guided repair of Gaussian splatting scenes", "confix"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool uniform = false;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "Override every random seed");
  app.add_flag("--uniform-confidence", uniform, "Train with all-ones confidence (ablation)");
  app.add_option("--out", out_dir, "Output directory");

  using Command = void (*)(const CommandOptions&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> table = {
      {"render", "Render rgb, alpha and depth of the initial scene", cmd_render},
      {"confidence", "Score pseudo-targets against the support views", cmd_confidence},
      {"repair", "Optimise the scene against confidence-weighted targets", cmd_repair},
      {"eval", "PSNR/SSIM of the repaired scene on novel views", cmd_eval},
      {"synth-bench", "Synthetic weighted vs uniform comparison", cmd_synth_bench},
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, help, fn] : table) subs.emplace_back(app.add_subcommand(name, help)->fallthrough(), fn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    const CommandOptions opt =
        make_options(config_path, seed, uniform, out_dir ? std::optional<fs::path>(*out_dir) : std::nullopt);
    for (const auto& [sub, fn] : subs) {
      if (*sub) fn(opt, out);
    }
    return kExitOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace confix

#include "confix/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include <json.hpp>

#include "confix/error.hpp"

namespace confix {

namespace {

using Json = nlohmann::ordered_json;

/// A JSON object bound field by field to a C++ struct, so parsing and
/// serialisation share one key list.
class Section {
 public:
  explicit Section(std::string name) : name_(std::move(name)) {}

  template <typename T>
  void field(const char* key, T& value) {
    keys_.emplace_back(key);
    readers_.emplace_back([key, &value, this](const Json& j) {
      try {
        value = j.at(key).get<T>();
      } catch (const Json::exception&) {
        throw ValidationError("config: bad value for '" + qualified(key) + "'");
      }
    });
    writers_.emplace_back([key, &value](Json& j) { j[key] = value; });
  }

  void path(const char* key, std::filesystem::path& value) {
    keys_.emplace_back(key);
    readers_.emplace_back([key, &value, this](const Json& j) {
      if (!j.at(key).is_string()) throw ValidationError("config: '" + qualified(key) + "' must be a string");
      value = j.at(key).get<std::string>();
    });
    writers_.emplace_back([key, &value](Json& j) { j[key] = value.string(); });
  }

  void vec3(const char* key, Eigen::Vector3d& value) {
    keys_.emplace_back(key);
    readers_.emplace_back([key, &value, this](const Json& j) {
      const Json& a = j.at(key);
      if (!a.is_array() || a.size() != 3) throw ValidationError("config: '" + qualified(key) + "' must be [r, g, b]");
      for (int i = 0; i < 3; ++i) {
        if (!a[i].is_number()) throw ValidationError("config: '" + qualified(key) + "' must be numeric");
        value[i] = a[i].get<double>();
      }
    });
    writers_.emplace_back([key, &value](Json& j) { j[key] = {value[0], value[1], value[2]}; });
  }

  void custom(const char* key, std::function<void(const Json&)> read, std::function<void(Json&)> write) {
    keys_.emplace_back(key);
    readers_.push_back(std::move(read));
    writers_.push_back(std::move(write));
  }

  void read(const Json& j) const {
    if (!j.is_object()) throw ValidationError("config: '" + name_ + "' must be an object");
    for (const auto& item : j.items()) {
      bool known = false;
      for (const auto& k : keys_) known = known || k == item.key();
      if (!known) throw ValidationError("config: unknown key '" + qualified(item.key()) + "'");
    }
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (j.contains(keys_[i])) readers_[i](j);
    }
  }

  Json write() const {
    Json j = Json::object();
    for (const auto& w : writers_) w(j);
    return j;
  }

 private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  std::string name_;
  std::vector<std::string> keys_;
  std::vector<std::function<void(const Json&)>> readers_;
  std::vector<std::function<void(Json&)>> writers_;
};

void bind_repair(Section& s, RepairConfig& r) {
  s.field("iterations", r.iterations);
  s.field("densify_interval", r.densify_interval);
  s.field("batch_size", r.batch_size);
  s.field("lr_position", r.lr_position);
  s.field("lr_color", r.lr_color);
  s.field("lr_log_scale", r.lr_log_scale);
  s.field("lr_rotation", r.lr_rotation);
  s.field("lr_opacity_logit", r.lr_opacity_logit);
  s.field("lambda_ssim", r.lambda_ssim);
  s.field("lambda_gt", r.lambda_gt);
  s.field("sigma_e", r.sigma_e);
  s.field("gamma", r.gamma);
  s.field("alpha_min", r.alpha_min);
  s.field("smooth_k", r.smooth_k);
  s.field("densify_grad_threshold", r.densify_grad_threshold);
  s.field("prune_opacity", r.prune_opacity);
  s.field("split_scale_fraction", r.split_scale_fraction);
  s.field("densify_stop_fraction", r.densify_stop_fraction);
  s.field("split_scale_divisor", r.split_scale_divisor);
  s.field("split_children", r.split_children);
  s.field("clone_offset_fraction", r.clone_offset_fraction);
  s.field("adam_beta1", r.adam_beta1);
  s.field("adam_beta2", r.adam_beta2);
  s.field("adam_epsilon", r.adam_epsilon);
  s.field("rng_seed", r.rng_seed);
  s.vec3("background", r.background);
}

void bind_raster(Section& s, RasterConfig& r) {
  s.field("near_plane", r.near_plane);
  s.field("blur", r.blur);
  s.field("alpha_max", r.alpha_max);
  s.field("min_transmittance", r.min_transmittance);
  s.field("cull_sigmas", r.cull_sigmas);
  s.field("min_determinant", r.min_determinant);
}

void bind_corruption(Section& s, Corruption& c) {
  s.field("blur_sigma", c.blur_sigma);
  s.field("patch_count", c.patch_count);
  s.field("patch_size", c.patch_size);
  s.field("patch_color_shift", c.patch_color_shift);
  s.field("rng_seed", c.rng_seed);
  s.field("shared_layout", c.shared_layout);
}

void bind_benchmark(Section& s, PlaneBenchmarkParams& b) {
  s.field("grid_x", b.grid_x);
  s.field("grid_y", b.grid_y);
  s.field("spacing", b.spacing);
  s.field("depth", b.depth);
  s.field("image_size", b.image_size);
  s.field("focal", b.focal);
  s.field("views", b.views);
  s.field("support_stride", b.support_stride);
  s.field("baseline", b.baseline);
  s.field("color_noise", b.color_noise);
  s.field("seed", b.seed);
}

/// Builds the section tree for cfg; the returned sections reference cfg.
struct Schema {
  Section root{""};
  Section repair{"repair"};
  Section raster{"raster"};
  Section paths{"paths"};
  Section corruption{"corruption"};
  Section benchmark{"benchmark"};

  explicit Schema(PipelineConfig& cfg) {
    bind_repair(repair, cfg.repair);
    bind_raster(raster, cfg.repair.raster);
    paths.path("scene", cfg.scene);
    paths.path("cameras", cfg.cameras);
    paths.path("gt_dir", cfg.gt_dir);
    paths.path("targets_dir", cfg.targets_dir);
    paths.path("output_dir", cfg.output_dir);
    bind_corruption(corruption, cfg.corruption);
    bind_benchmark(benchmark, cfg.benchmark);

    auto sub = [this](const char* key, Section& s) {
      root.custom(key, [key, &s](const Json& j) { s.read(j.at(key)); }, [key, &s](Json& j) { j[key] = s.write(); });
    };
    sub("repair", repair);
    sub("raster", raster);
    sub("paths", paths);
    root.custom(
        "provider",
        [&cfg](const Json& j) {
          const Json& v = j.at("provider");
          if (v == "file") {
            cfg.provider = ProviderKind::File;
          } else if (v == "synthetic") {
            cfg.provider = ProviderKind::Synthetic;
          } else {
            throw ValidationError("config: 'provider' must be \"file\" or \"synthetic\"");
          }
        },
        [&cfg](Json& j) { j["provider"] = cfg.provider == ProviderKind::File ? "file" : "synthetic"; });
    sub("corruption", corruption);
    sub("benchmark", benchmark);
    root.field("uniform_confidence", cfg.uniform_confidence);
    root.field("checkpoint_interval", cfg.checkpoint_interval);
  }
};

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  PipelineConfig cfg;
  Schema schema(cfg);
  schema.root.read(j);
  validate(cfg.repair);
  if (cfg.checkpoint_interval < 0) throw ValidationError("config: checkpoint_interval must be >= 0");
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  Schema schema(copy);
  return schema.root.write().dump(2) + "\n";
}

}  // namespace confix

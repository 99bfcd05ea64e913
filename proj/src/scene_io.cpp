#include "confix/scene_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "confix/error.hpp"

namespace confix {

static_assert(std::endian::native == std::endian::little,
              "PLY reader assumes a little-endian host");

void validate_scene(const GaussianScene& scene) {
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& g = scene.gaussians[i];
    const bool finite = g.mean.allFinite() && g.log_scale.allFinite() && g.rotation.allFinite() &&
                        std::isfinite(g.opacity_logit) && g.color.allFinite();
    if (!finite) {
      throw ValidationError("scene: non-finite value in record " + std::to_string(i));
    }
    if (g.rotation.squaredNorm() == 0.0) {
      throw ValidationError("scene: zero quaternion in record " + std::to_string(i));
    }
  }
}

void validate_camera(const Camera& cam) {
  const std::string who = "camera " + std::to_string(cam.view_id) + ": ";
  if (cam.width <= 0 || cam.height <= 0) throw ValidationError(who + "non-positive image size");
  if (!cam.intrinsics.allFinite() || !cam.rotation.allFinite() || !cam.translation.allFinite()) {
    throw ValidationError(who + "non-finite parameters");
  }
  if (!(cam.fx() > 0.0) || !(cam.fy() > 0.0)) throw ValidationError(who + "focal length must be positive");
  if (cam.cx() < 0.0 || cam.cx() >= cam.width || cam.cy() < 0.0 || cam.cy() >= cam.height) {
    throw ValidationError(who + "principal point outside image");
  }
  const double ortho = (cam.rotation.transpose() * cam.rotation - Mat3<double>::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::abs(cam.rotation.determinant() - 1.0) > 1e-6) {
    throw ValidationError(who + "R is not a proper rotation");
  }
}

namespace {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> parse_type(const std::string& s) {
  static const std::map<std::string, PlyType> table = {
      {"char", PlyType::i8},    {"int8", PlyType::i8},     {"uchar", PlyType::u8},
      {"uint8", PlyType::u8},   {"short", PlyType::i16},   {"int16", PlyType::i16},
      {"ushort", PlyType::u16}, {"uint16", PlyType::u16},  {"int", PlyType::i32},
      {"int32", PlyType::i32},  {"uint", PlyType::u32},    {"uint32", PlyType::u32},
      {"float", PlyType::f32},  {"float32", PlyType::f32}, {"double", PlyType::f64},
      {"float64", PlyType::f64}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

template <typename T>
double read_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double read_value(const char* p, PlyType t) {
  switch (t) {
    case PlyType::i8: return read_as<std::int8_t>(p);
    case PlyType::u8: return read_as<std::uint8_t>(p);
    case PlyType::i16: return read_as<std::int16_t>(p);
    case PlyType::u16: return read_as<std::uint16_t>(p);
    case PlyType::i32: return read_as<std::int32_t>(p);
    case PlyType::u32: return read_as<std::uint32_t>(p);
    case PlyType::f32: return read_as<float>(p);
    case PlyType::f64: return read_as<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  PlyType type;
  std::size_t offset;
};

constexpr std::size_t kFieldCount = 14;
constexpr std::array<const char*, kFieldCount> kFields = {
    "x",       "y",       "z",       "f_dc_0",  "f_dc_1", "f_dc_2", "opacity",
    "scale_0", "scale_1", "scale_2", "rot_0",   "rot_1",  "rot_2",  "rot_3"};

}  // namespace

GaussianScene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scene file " + path.string());

  const auto fail = [&](const std::string& why) {
    return IoError("malformed PLY header in " + path.string() + ": " + why);
  };

  std::string line;
  if (!std::getline(in, line) || line != "ply") throw fail("missing 'ply' magic");

  bool format_ok = false;
  bool in_vertex = false;
  bool seen_vertex = false;
  bool vertex_first = true;
  std::size_t vertex_count = 0;
  std::size_t stride = 0;
  std::vector<Property> props;

  while (true) {
    if (!std::getline(in, line)) throw fail("unterminated header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "binary_little_endian") throw fail("unsupported format '" + fmt + "'");
      format_ok = true;
    } else if (kw == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (count < 0) throw fail("bad element count");
      if (name == "vertex") {
        if (seen_vertex) throw fail("duplicate vertex element");
        seen_vertex = true;
        in_vertex = true;
        vertex_count = static_cast<std::size_t>(count);
      } else {
        if (!seen_vertex) vertex_first = false;
        in_vertex = false;
      }
    } else if (kw == "property") {
      std::string type_name, name;
      ls >> type_name;
      if (type_name == "list") {
        if (in_vertex) throw fail("list properties are not supported on vertex");
        continue;
      }
      ls >> name;
      if (!in_vertex) continue;
      auto t = parse_type(type_name);
      if (!t || name.empty()) throw fail("bad property line '" + line + "'");
      props.push_back({name, *t, stride});
      stride += type_size(*t);
    } else {
      throw fail("unknown keyword '" + kw + "'");
    }
  }
  if (!format_ok) throw fail("missing format line");
  if (!seen_vertex) throw fail("no vertex element");
  if (!vertex_first) throw fail("vertex must be the first element");

  std::array<const Property*, kFieldCount> field{};
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    for (const auto& p : props) {
      if (p.name == kFields[f]) field[f] = &p;
    }
    if (field[f] == nullptr) {
      throw IoError("scene schema error in " + path.string() + ": missing required property '" +
                    kFields[f] + "'");
    }
  }

  GaussianScene scene;
  scene.gaussians.resize(vertex_count);
  std::vector<char> record(stride);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!in.read(record.data(), static_cast<std::streamsize>(stride))) {
      throw IoError("truncated PLY body in " + path.string() + " at record " + std::to_string(i));
    }
    std::array<double, kFieldCount> v{};
    for (std::size_t f = 0; f < kFieldCount; ++f) {
      v[f] = read_value(record.data() + field[f]->offset, field[f]->type);
    }
    auto& g = scene.gaussians[i];
    g.mean = {v[0], v[1], v[2]};
    g.color = {v[3], v[4], v[5]};
    g.opacity_logit = v[6];
    g.log_scale = {v[7], v[8], v[9]};
    g.rotation = {v[10], v[11], v[12], v[13]};
  }
  validate_scene(scene);
  return scene;
}

void save_scene(const GaussianScene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write scene file " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << scene.size() << "\n";
  for (std::size_t f = 0; f < kFieldCount; ++f) out << "property float " << kFields[f] << "\n";
  out << "end_header\n";
  std::vector<float> buf;
  buf.reserve(scene.size() * kFieldCount);
  for (const auto& g : scene.gaussians) {
    const std::array<double, kFieldCount> v = {
        g.mean[0],     g.mean[1],      g.mean[2],      g.color[0],      g.color[1],
        g.color[2],    g.opacity_logit, g.log_scale[0], g.log_scale[1], g.log_scale[2],
        g.rotation[0], g.rotation[1],  g.rotation[2],  g.rotation[3]};
    for (double d : v) buf.push_back(static_cast<float>(d));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("failed writing scene file " + path.string());
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed camera file " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw IoError("camera file " + path.string() + " must hold a JSON array");

  std::vector<Camera> cams;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& j = doc[i];
    Camera cam;
    try {
      cam.view_id = j.at("view_id").get<int>();
      cam.is_support = j.at("is_support").get<bool>();
      cam.width = j.at("width").get<int>();
      cam.height = j.at("height").get<int>();
      const auto k = j.at("K").get<std::vector<double>>();
      const auto r = j.at("R").get<std::vector<double>>();
      const auto t = j.at("t").get<std::vector<double>>();
      if (k.size() != 9 || r.size() != 9 || t.size() != 3) {
        throw IoError("camera entry " + std::to_string(i) + " in " + path.string() +
                      ": K and R need 9 values, t needs 3");
      }
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          cam.intrinsics(a, b) = k[a * 3 + b];
          cam.rotation(a, b) = r[a * 3 + b];
        }
        cam.translation[a] = t[a];
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError("camera entry " + std::to_string(i) + " in " + path.string() + ": " + e.what());
    }
    validate_camera(cam);
    cams.push_back(cam);
  }
  return cams;
}

void save_cameras(const std::vector<Camera>& cams, const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& c : cams) {
    std::vector<double> k, r;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        k.push_back(c.intrinsics(a, b));
        r.push_back(c.rotation(a, b));
      }
    }
    doc.push_back({{"view_id", c.view_id},
                   {"is_support", c.is_support},
                   {"width", c.width},
                   {"height", c.height},
                   {"K", k},
                   {"R", r},
                   {"t", {c.translation[0], c.translation[1], c.translation[2]}}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write camera file " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace confix

#include "madlo/dataset_io.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <system_error>

namespace madlo {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little,
              "scan readers assume a little-endian host");

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(ss).str();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ScanSource::validate() const {
  if (!fs::exists(path)) throw std::invalid_argument("scan source path does not exist: " + path.string());
  if (!(range.min_range >= 0.0 && range.min_range < range.max_range)) {
    throw std::invalid_argument("scan source: require 0 <= min_range < max_range");
  }
  if (!(scan_period > 0.0)) throw std::invalid_argument("scan source: scan_period must be positive");
}

std::vector<fs::path> list_scans(const fs::path& dir, ScanFormat kind) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  const std::string ext = kind == ScanFormat::kKittiBin ? ".bin" : ".ply";
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ext) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> scan_stamps(const fs::path& dir, std::size_t count, double scan_period) {
  for (const fs::path& candidate : {dir / "times.txt", dir.parent_path() / "times.txt"}) {
    std::ifstream in(candidate);
    if (!in) continue;
    std::vector<double> stamps;
    double t = 0.0;
    while (in >> t) stamps.push_back(t);
    const bool increasing = std::adjacent_find(stamps.begin(), stamps.end(),
                                               std::greater_equal<>()) == stamps.end();
    if (stamps.size() == count && increasing) return stamps;
  }
  std::vector<double> stamps(count);
  for (std::size_t i = 0; i < count; ++i) stamps[i] = static_cast<double>(i) * scan_period;
  return stamps;
}

PointCloud read_kitti_bin(const fs::path& path, const RangeFilter& range) {
  const std::string bytes = read_all(path);
  if (bytes.size() % 16 != 0) throw IoError("truncated KITTI scan: " + path.string());
  PointCloud cloud;
  const std::size_t n = bytes.size() / 16;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float xyz[3];
    std::memcpy(xyz, bytes.data() + 16 * i, sizeof(xyz));
    const Point3 p(xyz[0], xyz[1], xyz[2]);
    if (p.allFinite() && range.keep(p)) cloud.points.push_back(p);
  }
  return cloud;
}

void write_kitti_bin(const PointCloud& cloud, const fs::path& path) {
  std::string bytes(cloud.size() * 16, '\0');
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float rec[4] = {static_cast<float>(cloud.points[i].x()),
                          static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z()), 0.0f};
    std::memcpy(bytes.data() + 16 * i, rec, sizeof(rec));
  }
  write_file_atomic(path, bytes);
}

namespace {

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

PlyType parse_ply_type(const std::string& t) {
  if (t == "char" || t == "int8") return PlyType::kInt8;
  if (t == "uchar" || t == "uint8") return PlyType::kUint8;
  if (t == "short" || t == "int16") return PlyType::kInt16;
  if (t == "ushort" || t == "uint16") return PlyType::kUint16;
  if (t == "int" || t == "int32") return PlyType::kInt32;
  if (t == "uint" || t == "uint32") return PlyType::kUint32;
  if (t == "float" || t == "float32") return PlyType::kFloat32;
  if (t == "double" || t == "float64") return PlyType::kFloat64;
  throw IoError("PLY: unsupported property type '" + t + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUint8: return 1;
    case PlyType::kInt16:
    case PlyType::kUint16: return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

template <typename T>
double load_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double ply_load(PlyType t, const char* p) {
  switch (t) {
    case PlyType::kInt8: return load_as<std::int8_t>(p);
    case PlyType::kUint8: return load_as<std::uint8_t>(p);
    case PlyType::kInt16: return load_as<std::int16_t>(p);
    case PlyType::kUint16: return load_as<std::uint16_t>(p);
    case PlyType::kInt32: return load_as<std::int32_t>(p);
    case PlyType::kUint32: return load_as<std::uint32_t>(p);
    case PlyType::kFloat32: return load_as<float>(p);
    case PlyType::kFloat64: return load_as<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;

  std::size_t fixed_stride() const {
    std::size_t s = 0;
    for (const auto& p : properties) {
      if (p.is_list) throw IoError("PLY: list properties are only supported after the vertex element");
      s += ply_size(p.type);
    }
    return s;
  }
};

}  // namespace

PointCloud read_ply(const fs::path& path, const RangeFilter& range) {
  const std::string bytes = read_all(path);
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto end = bytes.find('\n', pos);
    if (end == std::string::npos) throw IoError("PLY: truncated header in " + path.string());
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    return trim(line);
  };

  if (next_line() != "ply") throw IoError("PLY: missing magic in " + path.string());
  bool binary = false;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt == "ascii") binary = false;
      else throw IoError("PLY: unsupported format '" + fmt + "'");
    } else if (word == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      if (!ls) throw IoError("PLY: malformed element line");
      elements.push_back(std::move(e));
    } else if (word == "property") {
      if (elements.empty()) throw IoError("PLY: property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(count_type);
        p.type = parse_ply_type(item_type);
      } else {
        p.type = parse_ply_type(type);
        ls >> p.name;
      }
      if (!ls) throw IoError("PLY: malformed property line");
      elements.back().properties.push_back(std::move(p));
    } else {
      throw IoError("PLY: unexpected header keyword '" + word + "'");
    }
  }

  const auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                      [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) throw IoError("PLY: no vertex element in " + path.string());
  const PlyElement& vertex = *vertex_it;

  int ix = -1, iy = -1, iz = -1, it = -1;
  for (std::size_t k = 0; k < vertex.properties.size(); ++k) {
    const std::string& name = vertex.properties[k].name;
    if (name == "x") ix = static_cast<int>(k);
    else if (name == "y") iy = static_cast<int>(k);
    else if (name == "z") iz = static_cast<int>(k);
    else if (name == "time" || name == "t") it = static_cast<int>(k);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw IoError("PLY: vertex lacks x/y/z");

  std::vector<double> values(vertex.properties.size());
  PointCloud cloud;
  std::vector<double> times;
  auto emit = [&]() {
    const Point3 p(values[ix], values[iy], values[iz]);
    if (!p.allFinite() || !range.keep(p)) return;
    cloud.points.push_back(p);
    if (it >= 0) times.push_back(values[it]);
  };

  if (binary) {
    for (auto e = elements.begin(); e != vertex_it; ++e) pos += e->fixed_stride() * e->count;
    const std::size_t stride = vertex.fixed_stride();
    if (pos + stride * vertex.count > bytes.size()) throw IoError("PLY: truncated binary body");
    for (std::size_t v = 0; v < vertex.count; ++v) {
      const char* rec = bytes.data() + pos + v * stride;
      std::size_t off = 0;
      for (std::size_t k = 0; k < vertex.properties.size(); ++k) {
        values[k] = ply_load(vertex.properties[k].type, rec + off);
        off += ply_size(vertex.properties[k].type);
      }
      emit();
    }
  } else {
    std::istringstream body(bytes.substr(pos));
    std::string line;
    for (auto e = elements.begin(); e != vertex_it; ++e) {
      for (std::size_t i = 0; i < e->count; ++i) std::getline(body, line);
    }
    for (std::size_t v = 0; v < vertex.count; ++v) {
      if (!std::getline(body, line)) throw IoError("PLY: truncated ASCII body");
      std::istringstream ls(line);
      for (std::size_t k = 0; k < vertex.properties.size(); ++k) {
        if (vertex.properties[k].is_list) throw IoError("PLY: list property in vertex element");
        if (!(ls >> values[k])) throw IoError("PLY: malformed vertex line");
      }
      emit();
    }
  }

  if (it >= 0 && !times.empty()) {
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    if (*lo < 0.0 || *hi > 1.0) {
      const double lo_v = *lo;
      const double span = *hi - *lo;
      for (double& t : times) t = span > 0.0 ? (t - lo_v) / span : 0.0;
    }
    cloud.rel_times = std::move(times);
  }
  return cloud;
}

void write_ply(const PointCloud& cloud, const fs::path& path) {
  std::ostringstream out;
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.rel_times) out << "property double time\n";
  out << "end_header\n";
  std::string body = std::move(out).str();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double rec[4] = {cloud.points[i].x(), cloud.points[i].y(), cloud.points[i].z(), 0.0};
    std::size_t n = 3;
    if (cloud.rel_times) rec[n++] = (*cloud.rel_times)[i];
    body.append(reinterpret_cast<const char*>(rec), n * sizeof(double));
  }
  write_file_atomic(path, body);
}

PointCloud read_scan(const fs::path& path, const ScanSource& source) {
  return source.kind == ScanFormat::kKittiBin ? read_kitti_bin(path, source.range)
                                              : read_ply(path, source.range);
}

PointCloud synthesize_rel_times(const PointCloud& cloud) {
  PointCloud out = cloud;
  std::vector<double> times(cloud.size());
  if (!cloud.empty()) {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    const double theta0 = std::atan2(cloud.points[0].y(), cloud.points[0].x());
    constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double theta = std::atan2(cloud.points[i].y(), cloud.points[i].x());
      double d = std::fmod(theta0 - theta, kTwoPi);
      if (d < 0.0) d += kTwoPi;
      times[i] = std::min(d / kTwoPi, kBelowOne);
    }
  }
  out.rel_times = std::move(times);
  return out;
}

namespace {

std::vector<double> parse_numbers(const std::string& line) {
  std::vector<double> v;
  std::istringstream ls(line);
  std::string tok;
  while (ls >> tok) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw IoError("malformed number '" + tok + "'");
    }
    if (used != tok.size()) throw IoError("malformed number '" + tok + "'");
    v.push_back(x);
  }
  return v;
}

}  // namespace

void write_trajectory_kitti(const Trajectory& traj, std::ostream& out) {
  const auto old_precision = out.precision(17);
  for (const auto& sp : traj) {
    const Mat3& r = sp.pose.rotation();
    const Vec3& t = sp.pose.translation();
    for (int i = 0; i < 3; ++i) {
      out << r(i, 0) << ' ' << r(i, 1) << ' ' << r(i, 2) << ' ' << t(i) << (i == 2 ? '\n' : ' ');
    }
  }
  out.precision(old_precision);
}

void write_trajectory_kitti(const Trajectory& traj, const fs::path& path) {
  std::ostringstream ss;
  write_trajectory_kitti(traj, ss);
  write_file_atomic(path, ss.str());
}

Trajectory read_trajectory_kitti(std::istream& in, double stamp_step) {
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto v = parse_numbers(line);
    if (v.size() != 12) {
      throw IoError("KITTI pose line " + std::to_string(line_no) + ": expected 12 values, got " +
                    std::to_string(v.size()));
    }
    Mat3 r;
    Vec3 t;
    for (int i = 0; i < 3; ++i) {
      r.row(i) << v[4 * i], v[4 * i + 1], v[4 * i + 2];
      t(i) = v[4 * i + 3];
    }
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-3) {
      throw IoError("KITTI pose line " + std::to_string(line_no) + ": rotation not orthonormal");
    }
    traj.push_back({Isometry3::from_approximate(r, t), double(traj.size()) * stamp_step});
  }
  return traj;
}

Trajectory read_trajectory_kitti(const fs::path& path, double stamp_step) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_trajectory_kitti(in, stamp_step);
}

void write_trajectory_tum(const Trajectory& traj, std::ostream& out) {
  const auto old_precision = out.precision(17);
  for (const auto& sp : traj) {
    const Eigen::Quaterniond q(sp.pose.rotation());
    const Vec3& t = sp.pose.translation();
    out << sp.stamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' '
        << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
  out.precision(old_precision);
}

void write_trajectory_tum(const Trajectory& traj, const fs::path& path) {
  std::ostringstream ss;
  write_trajectory_tum(traj, ss);
  write_file_atomic(path, ss.str());
}

Trajectory read_trajectory_tum(std::istream& in) {
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto v = parse_numbers(t);
    if (v.size() != 8) {
      throw IoError("TUM pose line " + std::to_string(line_no) + ": expected 8 values, got " +
                    std::to_string(v.size()));
    }
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.5)) throw IoError("TUM pose line " + std::to_string(line_no) + ": bad quaternion");
    q.normalize();
    traj.push_back({Isometry3::from_approximate(q.toRotationMatrix(), Vec3(v[1], v[2], v[3])), v[0]});
  }
  return traj;
}

Trajectory read_trajectory_tum(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_trajectory_tum(in);
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

void RunConfig::validate() const {
  if (!(b_min > 0.0 && b_min < b_max)) throw std::invalid_argument("config: require 0 < b_min < b_max");
  if (!(b_ratio > 0.0)) throw std::invalid_argument("config: b_ratio must be positive");
  if (!(p_th >= 0.0 && p_th <= 1.0)) throw std::invalid_argument("config: p_th must lie in [0, 1]");
  if (!(rho_ker > 0.0)) throw std::invalid_argument("config: rho_ker must be positive");
  if (n < 2) throw std::invalid_argument("config: n must be at least 2");
  if (threads < 1) throw std::invalid_argument("config: threads must be at least 1");
  if (max_iterations < 1) throw std::invalid_argument("config: max_iterations must be at least 1");
  if (!(min_range >= 0.0 && min_range < max_range)) {
    throw std::invalid_argument("config: require 0 <= min_range < max_range");
  }
  if (!(scan_period > 0.0)) throw std::invalid_argument("config: scan_period must be positive");
  if (keyframes < 1) throw std::invalid_argument("config: keyframes must be at least 1");
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x)) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + v + "'");
  }
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::abs(x) > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("config: " + key + " must be an integer");
  }
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string s = lower(v);
  if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("config: " + key + " must be on/off");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "b_max") b_max = to_double(key, value);
  else if (key == "b_min") b_min = to_double(key, value);
  else if (key == "b_ratio") b_ratio = to_double(key, value);
  else if (key == "p_th") p_th = to_double(key, value);
  else if (key == "rho_ker") rho_ker = to_double(key, value);
  else if (key == "n") n = to_int(key, value);
  else if (key == "threads") threads = to_int(key, value);
  else if (key == "max_iterations") max_iterations = to_int(key, value);
  else if (key == "time_budget_ms") time_budget_ms = to_double(key, value);
  else if (key == "min_range") min_range = to_double(key, value);
  else if (key == "max_range") max_range = to_double(key, value);
  else if (key == "scan_period") scan_period = to_double(key, value);
  else if (key == "deskew") deskew = to_bool(key, value);
  else if (key == "keyframes") keyframes = to_int(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    base.set(trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  base.validate();
  return base;
}

RunConfig read_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, base);
}

}  // namespace madlo

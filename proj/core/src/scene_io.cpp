#include "tabletrec/scene_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tabletrec/errors.hpp"
#include "tabletrec/image_io.hpp"
#include "tabletrec/metrics.hpp"
#include "tabletrec/texture_atlas.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tabletrec {

namespace {

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec_from(const json& j) { return {j.at(0), j.at(1), j.at(2)}; }

GridF load_depth(const std::string& path) {
  if (path.ends_with(".pfm")) {
    GridF gray;
    Image rgb;
    bool is_color;
    if (!read_pfm(path, gray, rgb, is_color)) throw LoadError("cannot open depth: " + path);
    if (is_color) throw LoadError("depth PFM must be single channel: " + path);
    return gray;
  }
  const PngData png = read_png(path);
  if (png.channels != 1) throw LoadError("depth PNG must be single channel: " + path);
  GridF out(png.height, png.width);
  // 16-bit PNG depth is millimeters by convention.
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x)
      out.at(y, x) = png.samples[size_t(y) * png.width + x] / 1000.0;
  return out;
}

Image load_normals(const std::string& path) {
  if (path.ends_with(".pfm")) {
    GridF gray;
    Image rgb;
    bool is_color;
    if (!read_pfm(path, gray, rgb, is_color)) throw LoadError("cannot open normals: " + path);
    if (!is_color) throw LoadError("normal PFM must be 3-channel: " + path);
    for (Vec3& n : rgb.data) {
      const double len = norm(n);
      n = len > 1e-6 ? n / len : Vec3{};
    }
    return rgb;
  }
  Image img = read_png_rgb(path);
  for (Vec3& n : img.data) {
    n = n * 2.0 - Vec3{1, 1, 1};  // [0,1] -> [-1,1]
    const double len = norm(n);
    n = len > 0.2 ? n / len : Vec3{};
  }
  return img;
}

}  // namespace

std::vector<CameraView> load_scene(const std::string& dir, SceneManifest* manifest_out) {
  SceneManifest manifest;

  std::ifstream intr(fs::path(dir) / "intrinsics.txt");
  if (!intr) throw LoadError("missing intrinsics.txt in " + dir);
  Intrinsics& K = manifest.intrinsics;
  if (!(intr >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height))
    throw LoadError("malformed intrinsics.txt in " + dir);
  if (K.fx <= 0 || K.fy <= 0 || K.width <= 0 || K.height <= 0)
    throw LoadError("invalid intrinsics in " + dir);

  std::ifstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw LoadError("missing manifest.txt in " + dir);
  std::string line;
  int line_no = 0;
  while (std::getline(mf, line)) {
    ++line_no;
    std::istringstream ss(line);
    FrameRecord rec;
    if (!(ss >> rec.image_path)) continue;  // blank line
    for (double& p : rec.pose)
      if (!(ss >> p))
        throw LoadError("manifest line " + std::to_string(line_no) + ": expected 16 pose floats");
    ss >> rec.depth_path >> rec.normal_path;
    manifest.frames.push_back(std::move(rec));
  }
  if (manifest.frames.empty()) throw LoadError("manifest.txt lists no frames in " + dir);

  std::vector<CameraView> views;
  views.reserve(manifest.frames.size());
  for (size_t i = 0; i < manifest.frames.size(); ++i) {
    const FrameRecord& rec = manifest.frames[i];
    CameraView view;
    view.K = manifest.intrinsics;

    const auto& p = rec.pose;
    view.pose.R = Mat3::from_rows({p[0], p[1], p[2]}, {p[4], p[5], p[6]}, {p[8], p[9], p[10]});
    view.pose.t = {p[3], p[7], p[11]};
    if (!pose_rotation_valid(view.pose.R))
      throw LoadError("frame " + std::to_string(i) + ": pose rotation is not orthonormal");

    view.image = read_png_rgb((fs::path(dir) / rec.image_path).string());
    if (view.image.width != view.K.width || view.image.height != view.K.height)
      throw LoadError("frame " + std::to_string(i) + ": image size differs from intrinsics");
    if (!rec.depth_path.empty())
      view.depth_supervision = load_depth((fs::path(dir) / rec.depth_path).string());
    if (!rec.normal_path.empty())
      view.normal_supervision = load_normals((fs::path(dir) / rec.normal_path).string());
    views.push_back(std::move(view));
  }
  if (manifest_out) *manifest_out = std::move(manifest);
  return views;
}

void write_scene(const std::string& dir, std::span<const CameraView> views) {
  fs::create_directories(dir);
  if (views.empty()) throw Error("write_scene: no views");

  {
    std::ofstream intr(fs::path(dir) / "intrinsics.txt");
    const Intrinsics& K = views.front().K;
    intr.precision(17);
    intr << K.fx << " " << K.fy << " " << K.cx << " " << K.cy << " " << K.width << " " << K.height
         << "\n";
  }

  std::ofstream mf(fs::path(dir) / "manifest.txt");
  mf.precision(17);
  char name[64];
  for (size_t i = 0; i < views.size(); ++i) {
    const CameraView& v = views[i];
    std::snprintf(name, sizeof name, "frame_%03zu", i);
    const std::string image_name = std::string(name) + ".png";
    write_png((fs::path(dir) / image_name).string(), v.image);

    std::string depth_name, normal_name;
    if (v.has_depth()) {
      depth_name = std::string(name) + "_depth.pfm";
      write_pfm((fs::path(dir) / depth_name).string(), v.depth_supervision);
    }
    if (v.has_normal()) {
      normal_name = std::string(name) + "_normal.pfm";
      write_pfm((fs::path(dir) / normal_name).string(), v.normal_supervision);
    }

    mf << image_name;
    const Mat3& R = v.pose.R;
    const Vec3& t = v.pose.t;
    const double pose[16] = {R(0, 0), R(0, 1), R(0, 2), t.x, R(1, 0), R(1, 1), R(1, 2), t.y,
                             R(2, 0), R(2, 1), R(2, 2), t.z, 0,       0,       0,       1};
    for (double p : pose) mf << " " << p;
    if (!depth_name.empty()) mf << " " << depth_name;
    if (!normal_name.empty()) mf << " " << normal_name;
    mf << "\n";
  }
}

void export_planes(const PlaneSet& planes, std::span<const CameraView> views,
                   const std::string& dir) {
  fs::create_directories(dir);
  const std::span<const Tablet> tablets(planes.planes);
  const TextureAtlas atlas = plan_atlas(tablets);
  Image page_color;
  GridF page_alpha;
  bake_atlas(tablets, atlas, page_color, page_alpha);

  write_png((fs::path(dir) / "atlas.png").string(), page_color, page_alpha);
  write_pfm((fs::path(dir) / "atlas_color.pfm").string(), page_color);
  write_pfm((fs::path(dir) / "atlas_alpha.pfm").string(), page_alpha);

  json j;
  j["background"] = vec_json(planes.background);
  j["atlas"] = {{"rows", atlas.page_rows}, {"cols", atlas.page_cols}};
  j["planes"] = json::array();
  for (size_t i = 0; i < planes.planes.size(); ++i) {
    const Tablet& t = planes.planes[i];
    const TextureAtlas::Tile& tile = atlas.tiles[i];
    j["planes"].push_back({{"id", i},
                           {"center", vec_json(t.center)},
                           {"normal", vec_json(t.normal)},
                           {"up", vec_json(t.up)},
                           {"pixel_range", {t.pixel_range_u, t.pixel_range_v}},
                           {"ratio", {t.ratio_u, t.ratio_v}},
                           {"source_camera", t.source_camera},
                           {"ray_dir", vec_json(t.ray_dir)},
                           {"cam_distance", t.cam_distance},
                           {"tile", {tile.origin_row, tile.origin_col, tile.rows, tile.cols}}});
  }
  j["views"] = json::array();
  for (const CameraView& v : views) {
    const Mat3& R = v.pose.R;
    j["views"].push_back(
        {{"fx", v.K.fx},
         {"fy", v.K.fy},
         {"cx", v.K.cx},
         {"cy", v.K.cy},
         {"width", v.K.width},
         {"height", v.K.height},
         {"rotation", {R(0, 0), R(0, 1), R(0, 2), R(1, 0), R(1, 1), R(1, 2), R(2, 0), R(2, 1),
                       R(2, 2)}},
         {"translation", vec_json(v.pose.t)}});
  }
  std::ofstream(fs::path(dir) / "planes.json") << j.dump(1) << "\n";

  // Wavefront mesh: two triangles per plane, one material per plane, uv into atlas.png.
  {
    std::ofstream obj(fs::path(dir) / "mesh.obj");
    std::ofstream mtl(fs::path(dir) / "mesh.mtl");
    obj.precision(17);
    obj << "mtllib mesh.mtl\n";
    for (size_t i = 0; i < planes.planes.size(); ++i) {
      for (const Vec3& c : planes.planes[i].corners())
        obj << "v " << c.x << " " << c.y << " " << c.z << "\n";
      // Corner uv: (-u,-r)->(0,0), (-u,+r)->(0,cols), (+u,+r)->(rows,cols), (+u,-r)->(rows,0),
      // mapped into the packed page. OBJ v runs bottom-up, page rows top-down.
      const TextureAtlas::Tile& tile = atlas.tiles[i];
      const double us[4] = {0, 0, double(tile.rows), double(tile.rows)};
      const double vs[4] = {0, double(tile.cols), double(tile.cols), 0};
      for (int k = 0; k < 4; ++k) {
        const double row = tile.origin_row + us[k];
        const double col = tile.origin_col + vs[k];
        obj << "vt " << col / atlas.page_cols << " " << 1.0 - row / atlas.page_rows << "\n";
      }
      mtl << "newmtl plane_" << i << "\nKd 1 1 1\nmap_Kd atlas.png\nmap_d atlas.png\n\n";
      obj << "usemtl plane_" << i << "\n";
      const size_t b = 4 * i + 1;  // OBJ is 1-based
      obj << "f " << b << "/" << b << " " << b + 1 << "/" << b + 1 << " " << b + 2 << "/" << b + 2
          << "\n";
      obj << "f " << b << "/" << b << " " << b + 2 << "/" << b + 2 << " " << b + 3 << "/" << b + 3
          << "\n";
    }
  }

  const LabeledPointCloud cloud = sample_planeset(planes);
  write_labeled_ply((fs::path(dir) / "points.ply").string(), cloud.points, cloud.labels);
}

PlaneArchive load_planes(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "planes.json");
  if (!f) throw LoadError("missing planes.json in " + dir);
  json j;
  f >> j;

  Image page_color;
  GridF page_alpha;
  {
    GridF gray;
    Image rgb;
    bool is_color;
    if (!read_pfm((fs::path(dir) / "atlas_color.pfm").string(), gray, rgb, is_color) || !is_color)
      throw LoadError("missing atlas_color.pfm in " + dir);
    page_color = std::move(rgb);
    if (!read_pfm((fs::path(dir) / "atlas_alpha.pfm").string(), gray, rgb, is_color) || is_color)
      throw LoadError("missing atlas_alpha.pfm in " + dir);
    page_alpha = std::move(gray);
  }

  PlaneArchive archive;
  archive.planes.background = vec_from(j.at("background"));
  for (const json& p : j.at("planes")) {
    Tablet t;
    t.center = vec_from(p.at("center"));
    t.normal = vec_from(p.at("normal"));
    t.up = vec_from(p.at("up"));
    t.right = cross(t.normal, t.up);
    t.pixel_range_u = p.at("pixel_range").at(0);
    t.pixel_range_v = p.at("pixel_range").at(1);
    t.ratio_u = p.at("ratio").at(0);
    t.ratio_v = p.at("ratio").at(1);
    t.source_camera = p.at("source_camera");
    t.ray_dir = vec_from(p.at("ray_dir"));
    t.cam_distance = p.at("cam_distance");
    const int row = p.at("tile").at(0), col = p.at("tile").at(1);
    t.allocate_tiles();
    for (int i = 0; i < t.tex_rows(); ++i)
      for (int k = 0; k < t.tex_cols(); ++k) {
        t.texture.at(i, k) = page_color.at(row + i, col + k);
        t.alpha.at(i, k) = page_alpha.at(row + i, col + k);
      }
    archive.planes.planes.push_back(std::move(t));
  }
  for (const json& v : j.at("views")) {
    CameraView view;
    view.K = {v.at("fx"), v.at("fy"), v.at("cx"), v.at("cy"), v.at("width"), v.at("height")};
    const auto& r = v.at("rotation");
    view.pose.R = Mat3::from_rows({r.at(0), r.at(1), r.at(2)}, {r.at(3), r.at(4), r.at(5)},
                                  {r.at(6), r.at(7), r.at(8)});
    view.pose.t = vec_from(v.at("translation"));
    archive.views.push_back(std::move(view));
  }
  return archive;
}

void write_labeled_ply(const std::string& path, const std::vector<Vec3>& points,
                       const std::vector<int>& labels) {
  std::ofstream f(path);
  if (!f) throw LoadError("cannot open for writing: " + path);
  f.precision(17);
  f << "ply\nformat ascii 1.0\nelement vertex " << points.size()
    << "\nproperty float x\nproperty float y\nproperty float z\nproperty int plane_id\n"
       "end_header\n";
  for (size_t i = 0; i < points.size(); ++i)
    f << points[i].x << " " << points[i].y << " " << points[i].z << " " << labels[i] << "\n";
}

void dump_render(const RenderOutput& render, const std::string& prefix) {
  write_png(prefix + "_color.png", render.color);
  write_pfm(prefix + "_depth.pfm", render.depth);
  write_pfm(prefix + "_normal.pfm", render.normal);
  write_pfm(prefix + "_opacity.pfm", render.opacity);
}

void read_labeled_ply(const std::string& path, std::vector<Vec3>& points,
                      std::vector<int>& labels) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open: " + path);
  std::string line;
  size_t count = 0;
  while (std::getline(f, line)) {
    if (line.rfind("element vertex", 0) == 0) count = std::stoull(line.substr(15));
    if (line == "end_header") break;
  }
  points.clear();
  labels.clear();
  points.reserve(count);
  labels.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    Vec3 p;
    int label;
    if (!(f >> p.x >> p.y >> p.z >> label)) throw LoadError("truncated PLY: " + path);
    points.push_back(p);
    labels.push_back(label);
  }
}

}  // namespace tabletrec

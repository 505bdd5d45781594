// tabletrec: plane reconstruction from posed image sequences.
//
//   tabletrec synth <box|quad> -o <scene_dir>
//   tabletrec reconstruct <scene_dir> -o <out_dir> [--config file] [--seed N]
//   tabletrec render <out_dir> --view K -o img.png
//   tabletrec edit <out_dir> --plane ID (--texture file | --tint r,g,b)
//   tabletrec eval <out_dir> --gt <gt_dir> [--tau T] [-o metrics.json]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabletrec/config.hpp"
#include "tabletrec/errors.hpp"
#include "tabletrec/image_io.hpp"
#include "tabletrec/metrics.hpp"
#include "tabletrec/pipeline.hpp"
#include "tabletrec/scene_io.hpp"
#include "tabletrec/synth.hpp"

namespace fs = std::filesystem;
using namespace tabletrec;

namespace {

int run_synth(const std::string& preset, const std::string& out_dir) {
  write_synth_scene(preset, out_dir);
  std::cout << "wrote synthetic scene '" << preset << "' to " << out_dir << "\n";
  return 0;
}

int run_reconstruct(const std::string& scene_dir, const std::string& out_dir,
                    const std::string& config_path, uint64_t seed, bool seed_set) {
  Config config;
  if (!config_path.empty()) config = load_config(config_path);
  if (seed_set) config.seed = seed;

  const std::vector<CameraView> views = load_scene(scene_dir);
  fs::create_directories(out_dir);
  std::ofstream loss_csv(fs::path(out_dir) / "losses.csv");
  std::ofstream merge_csv(fs::path(out_dir) / "merge_log.csv");
  loss_csv << "step,L_pho,L_ainv,L_dist,L_depth,L_normal,total\n";
  merge_csv << "event,pass,set_count,dropped\n";
  ReconstructHooks hooks;
  hooks.loss_csv = &loss_csv;
  hooks.merge_csv = &merge_csv;

  const PlaneSet planes = reconstruct(views, config, hooks);
  export_planes(planes, views, out_dir);
  std::ofstream(fs::path(out_dir) / "config.txt") << serialize_config(config);

  // Reference render of view 0, produced from the exported archive so that
  // `render --view 0` reproduces it byte for byte.
  const PlaneArchive archive = load_planes(out_dir);
  const RenderOutput render =
      render_view(as_scene(archive.planes), archive.views.front(), config.raster);
  write_png((fs::path(out_dir) / "render_000.png").string(), render.color);

  std::cout << "reconstructed " << planes.planes.size() << " planes into " << out_dir << "\n";
  return 0;
}

int run_render(const std::string& out_dir, int view_index, const std::string& image_path,
               const std::string& config_path, bool dump_buffers) {
  Config config;
  if (!config_path.empty()) config = load_config(config_path);
  const PlaneArchive archive = load_planes(out_dir);
  if (view_index < 0 || view_index >= int(archive.views.size()))
    throw NotFound("view index out of range: " + std::to_string(view_index));
  const RenderOutput render =
      render_view(as_scene(archive.planes), archive.views[view_index], config.raster);
  write_png(image_path, render.color);
  if (dump_buffers) {
    std::string prefix = image_path;
    const auto dot = prefix.rfind('.');
    if (dot != std::string::npos) prefix.erase(dot);
    dump_render(render, prefix);
  }
  std::cout << "rendered view " << view_index << " to " << image_path << "\n";
  return 0;
}

int run_edit(const std::string& out_dir, int plane_id, const std::string& texture_path,
             const std::string& tint_spec) {
  PlaneArchive archive = load_planes(out_dir);

  Image replacement;
  const Image* tex_ptr = nullptr;
  if (!texture_path.empty()) {
    replacement = read_png_rgb(texture_path);
    tex_ptr = &replacement;
  }
  std::optional<Vec3> tint;
  if (!tint_spec.empty()) {
    Vec3 t;
    char c1, c2;
    std::istringstream ss(tint_spec);
    if (!(ss >> t.x >> c1 >> t.y >> c2 >> t.z) || c1 != ',' || c2 != ',')
      throw Error("--tint expects r,g,b");
    tint = t;
  }
  edit_plane_texture(archive.planes, plane_id, tex_ptr, tint);
  export_planes(archive.planes, archive.views, out_dir);
  std::cout << "edited plane " << plane_id << " in " << out_dir << "\n";
  return 0;
}

int run_eval(const std::string& out_dir, const std::string& gt_dir, double tau,
             const std::string& metrics_path) {
  const PlaneArchive archive = load_planes(out_dir);

  std::vector<Vec3> gt_points;
  std::vector<int> gt_labels;
  read_labeled_ply((fs::path(gt_dir) / "gt_points.ply").string(), gt_points, gt_labels);

  const LabeledPointCloud pred = sample_planeset(archive.planes);
  const GeometryMetrics gm = geometry_metrics(pred.points, gt_points, tau);
  const std::vector<int> transferred = transfer_labels(archive.planes, gt_points);
  const SegmentationScores seg = segmentation_scores(transferred, gt_labels);

  nlohmann::json j;
  j["tau"] = tau;
  j["geometry"] = {{"comp", gm.comp},     {"acc", gm.acc},      {"recall", gm.recall},
                   {"prec", gm.prec},     {"fscore", gm.fscore}};
  j["segmentation"] = {{"voi", seg.voi}, {"ri", seg.ri}, {"sc", seg.sc}};
  const std::string text = j.dump(1);
  std::cout << text << "\n";
  if (!metrics_path.empty()) std::ofstream(metrics_path) << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabletrec: textured semi-transparent plane reconstruction"};
  app.require_subcommand(1);

  std::string scene_dir, out_dir = "out", image_path = "render.png", config_path;
  std::string preset, texture_path, tint_spec, gt_dir, metrics_path;
  uint64_t seed = 0;
  bool seed_set = false, dump_buffers = false;
  int view_index = 0, plane_id = -1;
  double tau = 0.05;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic test scene");
  synth->add_option("preset", preset, "box or quad")->required();
  synth->add_option("-o,--out", out_dir, "scene output directory")->required();

  CLI::App* rec = app.add_subcommand("reconstruct", "reconstruct planes from a scene directory");
  rec->add_option("scene", scene_dir, "scene directory")->required();
  rec->add_option("-o,--out", out_dir, "output directory")->required();
  rec->add_option("--config", config_path, "key-value config file");
  rec->add_option("--seed", seed, "deterministic seed")->each([&](const std::string&) {
    seed_set = true;
  });

  CLI::App* render = app.add_subcommand("render", "render a view from a reconstruction");
  render->add_option("out_dir", out_dir, "reconstruction directory")->required();
  render->add_option("--view", view_index, "view index")->required();
  render->add_option("-o,--image", image_path, "output PNG")->required();
  render->add_option("--config", config_path, "key-value config file");
  render->add_flag("--dump-buffers", dump_buffers, "also write depth/normal/opacity PFMs");

  CLI::App* edit = app.add_subcommand("edit", "edit one plane's texture");
  edit->add_option("out_dir", out_dir, "reconstruction directory")->required();
  edit->add_option("--plane", plane_id, "plane instance id")->required();
  edit->add_option("--texture", texture_path, "replacement texture PNG");
  edit->add_option("--tint", tint_spec, "per-channel scale r,g,b");

  CLI::App* eval = app.add_subcommand("eval", "evaluate against ground truth");
  eval->add_option("out_dir", out_dir, "reconstruction directory")->required();
  eval->add_option("--gt", gt_dir, "ground-truth directory")->required();
  eval->add_option("--tau", tau, "distance threshold (meters)");
  eval->add_option("-o,--metrics", metrics_path, "metrics JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // usage problems exit 2
  }

  try {
    if (synth->parsed()) return run_synth(preset, out_dir);
    if (rec->parsed()) return run_reconstruct(scene_dir, out_dir, config_path, seed, seed_set);
    if (render->parsed())
      return run_render(out_dir, view_index, image_path, config_path, dump_buffers);
    if (edit->parsed()) return run_edit(out_dir, plane_id, texture_path, tint_spec);
    if (eval->parsed()) return run_eval(out_dir, gt_dir, tau, metrics_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

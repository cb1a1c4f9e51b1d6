// Command-line front end: rendering, view selection, dataset synthesis,
// desk-scale training and the evaluation statistics, glued together by one
// root seed so any run is reproducible from its flags.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mufen/dataset.hpp"
#include "mufen/diffusion.hpp"
#include "mufen/image_io.hpp"
#include "mufen/metrics.hpp"
#include "mufen/obj_io.hpp"
#include "mufen/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

ordered_json camera_to_json(const mufen::CameraPose& cam) {
  ordered_json j;
  j["translation"] = {cam.translation.x, cam.translation.y, cam.translation.z};
  if (const auto* wp = std::get_if<mufen::WeakPerspective>(&cam.projection))
    j["projection"] = {{"type", "weak_perspective"}, {"scale", wp->scale}};
  else
    j["projection"] = {{"type", "perspective"},
                       {"yfov", std::get<mufen::Perspective>(cam.projection).yfov}};
  return j;
}

ordered_json bundle_manifest(const std::string& sample_id, const std::string& label,
                             const mufen::ViewPair& selected,
                             const std::array<mufen::ViewPair, 3>& pairs,
                             const mufen::PriorBundle& bundle,
                             const ordered_json& files) {
  ordered_json j;
  j["sample_id"] = sample_id;
  if (!label.empty()) j["label"] = label;
  j["pair"] = mufen::pair_name(selected.id);
  j["scores"] = {pairs[0].score, pairs[1].score, pairs[2].score};
  j["bbox"] = bundle.bbox;
  j["files"] = files;
  return j;
}

mufen::PriorBundle write_bundle(const mufen::HandMesh& mesh,
                                const mufen::CameraPose& camera,
                                const mufen::ViewPair& selected, int size,
                                const fs::path& dir, ordered_json& files) {
  const mufen::PriorBundle bundle =
      mufen::emit_pair_renders(mesh, camera, selected, size, size);
  const std::string name_a = "render_" + mufen::view_name(selected.first) + ".ppm";
  const std::string name_b = "render_" + mufen::view_name(selected.second) + ".ppm";
  mufen::write_ppm(bundle.rgb_a, (dir / name_a).string());
  mufen::write_ppm(bundle.rgb_b, (dir / name_b).string());
  mufen::write_pgm16(bundle.depth_front, (dir / "depth_front.pgm").string());
  files["render_a"] = name_a;
  files["render_b"] = name_b;
  files["depth_front"] = "depth_front.pgm";
  return bundle;
}

int cmd_render(const std::string& mesh_path, const std::string& camera_path,
               const std::string& view_name, const std::string& out_dir, int size,
               int threads) {
  const mufen::HandMesh mesh = mufen::load_obj(mesh_path);
  const mufen::CameraPose camera = mufen::load_camera_json(camera_path);
  const mufen::ViewId view = mufen::parse_view(view_name);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const mufen::Framebuffer fb = mufen::render_view(mesh, camera, view, size, size, threads);

  const auto [vmesh, vcam] =
      mufen::transform_to_view(mufen::centered_on_centroid(mesh), camera, view);
  const mufen::GrayImage depth =
      mufen::normalize_depth(mufen::rasterize(vmesh, vcam, size, size, threads));

  const std::string rgb_name = "render_" + view_name + ".ppm";
  const std::string depth_name = "depth_" + view_name + ".pgm";
  mufen::write_ppm(fb, (dir / rgb_name).string());
  mufen::write_pgm16(depth, (dir / depth_name).string());

  ordered_json meta;
  meta["view"] = view_name;
  meta["width"] = size;
  meta["height"] = size;
  meta["camera"] = camera_to_json(vcam);
  meta["covered_fraction"] =
      static_cast<double>(fb.covered_count()) / (static_cast<double>(size) * size);
  meta["files"] = {{"rgb", rgb_name}, {"depth", depth_name}};
  std::ofstream meta_out(dir / ("render_" + view_name + ".json"));
  meta_out << meta.dump(2) << '\n';

  std::cout << meta.dump() << std::endl;
  return 0;
}

int cmd_select_views(const std::string& mesh_path, const std::string& camera_path,
                     const std::string& out_dir, int size, bool single_view_max) {
  const mufen::HandMesh mesh = mufen::load_obj(mesh_path);
  const mufen::CameraPose camera = mufen::load_camera_json(camera_path);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  // All six shaded views, then the scored pairs and the winner's bundle.
  for (mufen::ViewId v : mufen::kAllViews) {
    const mufen::Framebuffer fb = mufen::render_view(mesh, camera, v, size, size);
    mufen::write_ppm(fb, (dir / ("view_" + mufen::view_name(v) + ".ppm")).string());
  }
  const auto pairs = mufen::score_pairs(mesh, camera, size, size);
  const mufen::ViewPair selected = mufen::select_pair(pairs, single_view_max);

  ordered_json files;
  const mufen::PriorBundle bundle = write_bundle(mesh, camera, selected, size, dir, files);
  const ordered_json manifest =
      bundle_manifest("sample_0", "", selected, pairs, bundle, files);

  std::ofstream mf(dir / "manifest.jsonl");
  mf << manifest.dump() << '\n';
  std::cout << manifest.dump() << std::endl;
  return 0;
}

int cmd_synth_dataset(std::size_t n, std::uint64_t seed, const std::string& out_dir,
                      int size) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::ofstream mf(dir / "manifest.jsonl");
  for (std::size_t i = 0; i < n; ++i) {
    const mufen::SampleSpec spec = mufen::synth_sample_spec(seed, i);
    const fs::path sample_dir = dir / spec.sample_id;
    fs::create_directories(sample_dir);

    const auto pairs = mufen::score_pairs(spec.mesh, spec.camera, size, size);
    const mufen::ViewPair selected = mufen::select_pair(pairs);
    ordered_json files;
    const mufen::PriorBundle bundle =
        write_bundle(spec.mesh, spec.camera, selected, size, sample_dir, files);
    mufen::save_obj(spec.mesh, (sample_dir / "mesh.obj").string());
    files["mesh"] = "mesh.obj";

    mf << bundle_manifest(spec.sample_id, spec.label, selected, pairs, bundle, files)
              .dump()
       << '\n';
  }
  ordered_json summary;
  summary["count"] = n;
  summary["seed"] = seed;
  summary["manifest"] = (dir / "manifest.jsonl").string();
  std::cout << summary.dump() << std::endl;
  return 0;
}

mufen::TrainConfig parse_train_config(const std::string& path, std::string& out_dir) {
  std::ifstream in(path);
  if (!in) throw mufen::ParseError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw mufen::ParseError("invalid config JSON: " + std::string(e.what()));
  }

  static const std::set<std::string> known = {
      "seed",           "steps",           "batch_size",       "lr",
      "lambda",         "timesteps",       "samples",          "render_size",
      "encoder_channels", "backbone_channels", "bbox_dim",     "denoiser_hidden",
      "latent_scale",   "dtype",           "out_dir",          "single_view_max"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw mufen::ValidationError("unknown config key: '" + key + "'");

  mufen::TrainConfig cfg;
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("steps")) cfg.steps = j["steps"].get<std::size_t>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
  if (j.contains("lambda")) cfg.weights.lambda = j["lambda"].get<double>();
  if (j.contains("timesteps")) cfg.timesteps = j["timesteps"].get<std::size_t>();
  if (j.contains("samples")) cfg.dataset.count = j["samples"].get<std::size_t>();
  if (j.contains("render_size")) cfg.dataset.render_size = j["render_size"].get<int>();
  if (j.contains("encoder_channels"))
    cfg.network.encoder.out_channels = j["encoder_channels"].get<std::size_t>();
  if (j.contains("backbone_channels"))
    cfg.network.encoder.backbone_channels =
        j["backbone_channels"].get<std::vector<std::size_t>>();
  if (j.contains("bbox_dim")) cfg.network.bbox_dim = j["bbox_dim"].get<std::size_t>();
  if (j.contains("denoiser_hidden"))
    cfg.denoiser_hidden = j["denoiser_hidden"].get<std::size_t>();
  if (j.contains("latent_scale"))
    cfg.dataset.latent_scale = j["latent_scale"].get<double>();
  if (j.contains("single_view_max"))
    cfg.dataset.single_view_max = j["single_view_max"].get<bool>();
  if (j.contains("dtype")) {
    const std::string d = j["dtype"].get<std::string>();
    if (d == "f32")
      cfg.dtype = mufen::Dtype::f32;
    else if (d == "f64")
      cfg.dtype = mufen::Dtype::f64;
    else
      throw mufen::ValidationError("dtype must be 'f32' or 'f64'");
  }
  if (j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
  cfg.dataset.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

int cmd_train_toy(const std::string& config_path) {
  std::string out_dir;
  const mufen::TrainConfig cfg = parse_train_config(config_path, out_dir);

  std::cerr << "synthesizing " << cfg.dataset.count << " samples...\n";
  const auto dataset = mufen::make_toy_dataset(cfg.dataset);
  std::cerr << "training " << cfg.steps << " steps...\n";
  const mufen::TrainResult result = mufen::train_toy(cfg, dataset);

  ordered_json j;
  j["steps"] = cfg.steps;
  j["initial_loss"] = result.initial_loss;
  j["final_loss"] = result.final_loss;
  j["loss_ratio"] = result.final_loss / result.initial_loss;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    mufen::write_loss_csv(result.curve, (dir / "loss_curve.csv").string());
    mufen::save_checkpoint(result.checkpoint, (dir / "checkpoint.json").string());
    j["loss_curve"] = (dir / "loss_curve.csv").string();
    j["checkpoint"] = (dir / "checkpoint.json").string();
  }
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_eval_stats(const std::string& a_path, const std::string& b_path,
                   std::size_t subsets, std::size_t subset_size, std::uint64_t seed) {
  const mufen::FeatureSet a = mufen::FeatureSet::from_tensor(mufen::load_muft(a_path));
  const mufen::FeatureSet b = mufen::FeatureSet::from_tensor(mufen::load_muft(b_path));
  const double fid = mufen::frechet_distance(a, b);
  const mufen::KidResult k = mufen::kid(a, b, subsets, subset_size, seed);
  ordered_json j;
  j["fid"] = fid;
  j["kid_mean"] = k.mean;
  j["kid_std"] = k.std;
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_ttest(const std::string& scores_path) {
  std::ifstream in(scores_path);
  if (!in) throw mufen::ParseError("cannot open scores file: " + scores_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw mufen::ParseError("invalid scores JSON: " + std::string(e.what()));
  }
  mufen::GestureScores scores;
  try {
    scores.method_a = j.at("a").get<std::vector<double>>();
    scores.method_b = j.at("b").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw mufen::ParseError("scores file needs arrays 'a' and 'b': " +
                            std::string(e.what()));
  }
  const mufen::TTestResult r = mufen::paired_ttest(scores);
  ordered_json out;
  out["t"] = r.t;
  out["p"] = r.p;
  out["better_count"] = r.better_count;
  std::cout << out.dump() << std::endl;
  return 0;
}

json error_json(const std::string& kind, const std::string& message) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view hand-mesh prior pipeline"};
  app.require_subcommand(1);

  std::string mesh_path, camera_path, view_name, out_dir, config_path;
  std::string a_path, b_path, scores_path;
  int size = 512;
  int threads = 1;
  std::size_t n = 10;
  std::uint64_t seed = 7;
  bool single_view_max = false;
  std::size_t kid_subsets = 100, kid_subset_size = 0;

  auto* render = app.add_subcommand("render", "render one view of a mesh");
  render->add_option("--mesh", mesh_path, "OBJ mesh")->required();
  render->add_option("--camera", camera_path, "camera JSON")->required();
  render->add_option("--view", view_name, "front|rear|left|right|top|bottom")->required();
  render->add_option("--out", out_dir, "output directory")->required();
  render->add_option("--size", size, "square resolution");
  render->add_option("--threads", threads, "rasterizer threads (0 = auto)");

  auto* select = app.add_subcommand("select-views", "score pairs and emit the prior");
  select->add_option("--mesh", mesh_path)->required();
  select->add_option("--camera", camera_path)->required();
  select->add_option("--out", out_dir)->required();
  select->add_option("--size", size);
  select->add_flag("--single-view-max", single_view_max,
                   "select by the single largest view instead of the pair sum");

  auto* synth = app.add_subcommand("synth-dataset", "synthesize hands with priors");
  synth->add_option("--n", n, "sample count")->required();
  synth->add_option("--seed", seed, "root seed");
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--size", size);

  auto* train = app.add_subcommand("train-toy", "desk-scale training run");
  train->add_option("--config", config_path, "training config JSON")->required();

  auto* eval = app.add_subcommand("eval-stats", "Frechet + kernel distances");
  eval->add_option("--a", a_path, "MUFT feature set")->required();
  eval->add_option("--b", b_path, "MUFT feature set")->required();
  eval->add_option("--kid-subsets", kid_subsets);
  eval->add_option("--kid-subset-size", kid_subset_size);
  eval->add_option("--seed", seed);

  auto* ttest = app.add_subcommand("ttest", "paired t-test over gesture scores");
  ttest->add_option("--scores", scores_path, "JSON with arrays 'a' and 'b'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << e.what() << '\n';
    std::cout << error_json("usage", e.what()).dump() << std::endl;
    return kExitUsage;
  }

  try {
    if (render->parsed())
      return cmd_render(mesh_path, camera_path, view_name, out_dir, size, threads);
    if (select->parsed())
      return cmd_select_views(mesh_path, camera_path, out_dir, size, single_view_max);
    if (synth->parsed()) return cmd_synth_dataset(n, seed, out_dir, size);
    if (train->parsed()) return cmd_train_toy(config_path);
    if (eval->parsed())
      return cmd_eval_stats(a_path, b_path, kid_subsets, kid_subset_size, seed);
    if (ttest->parsed()) return cmd_ttest(scores_path);
  } catch (const mufen::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    std::cout << error_json("usage", e.what()).dump() << std::endl;
    return kExitUsage;
  } catch (const mufen::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    std::cout << error_json("numeric", e.what()).dump() << std::endl;
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    std::cout << error_json("data", e.what()).dump() << std::endl;
    return kExitData;
  }
  return 0;
}

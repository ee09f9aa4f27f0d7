// gridpull: reconstruct, evaluate, synthesize and inspect.
//
// Exit codes: 0 success, 2 invalid input (including malformed files),
// 3 numeric failure, 4 I/O failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <omp.h>
#include <openssl/evp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridpull/errors.hpp"
#include "gridpull/field.hpp"
#include "gridpull/io.hpp"
#include "gridpull/mesh_extract.hpp"
#include "gridpull/metrics.hpp"
#include "gridpull/optim.hpp"
#include "gridpull/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gridpull;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

json config_json(const TrainConfig& c, int mc_resolution) {
  return {{"resolution", c.resolution},
          {"m1", c.m1},
          {"m2", c.m2},
          {"queries", c.queries_per_iter},
          {"iterations", c.iterations},
          {"lr", c.lr0},
          {"lr_reference_resolution", c.lr_reference_resolution},
          {"decay", c.decay},
          {"decay_every", c.decay_every},
          {"alpha", c.weights.alpha},
          {"beta", c.weights.beta},
          {"gamma", c.weights.gamma},
          {"seed", c.seed},
          {"sphere_radius_cells", c.sphere_radius_cells},
          {"padding", c.padding},
          {"enclosed_sign", c.enclosed_sign},
          {"deterministic", c.deterministic},
          {"mc_resolution", mc_resolution}};
}

json loss_json(const LossReport& r) {
  return {{"pull", r.pull}, {"tv", r.tv}, {"surface", r.surface}, {"grad", r.grad_consistency}, {"total", r.total}};
}

struct ReconstructArgs {
  std::string input;
  std::string output;
  std::string checkpoint;
  std::string log;
  std::string manifest;
  bool noise_preset = false;
  bool lr_absolute = false;
  bool no_enclosed_sign = false;
  bool deterministic = false;
  int mc_resolution = 0;
  int progress_every = 100;
};

int run_reconstruct(TrainConfig cfg, const ReconstructArgs& a) {
  if (a.noise_preset) cfg.apply_noise_preset();
  if (a.lr_absolute) cfg.lr_reference_resolution = 0;
  cfg.enclosed_sign = !a.no_enclosed_sign;
  cfg.deterministic = a.deterministic;
  const int mc_res = a.mc_resolution > 0 ? a.mc_resolution : default_mc_resolution(cfg.resolution);
  cfg.validate();

  const auto t0 = std::chrono::steady_clock::now();
  const PointCloud cloud = read_point_cloud(a.input);

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw IoError("cannot open " + a.log + " for writing");
    log << "iter,lr,pull,tv,surface,grad,total,wall_ms\n";
  }
  char line[512];
  auto sink = [&](const ProgressRecord& r) {
    if (log.is_open()) {
      std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                    static_cast<long long>(r.iter), r.lr, r.loss.pull, r.loss.tv, r.loss.surface,
                    r.loss.grad_consistency, r.loss.total, r.wall_ms);
      log << line;
    }
    if (a.progress_every > 0 && (r.iter % a.progress_every == 0 || r.iter + 1 == cfg.iterations)) {
      std::fprintf(stderr, "iter %6lld  lr %.4g  loss %.6g  (pull %.4g tv %.4g surface %.4g grad %.4g)\n",
                   static_cast<long long>(r.iter), r.lr, r.loss.total, r.loss.pull, r.loss.tv, r.loss.surface,
                   r.loss.grad_consistency);
    }
  };

  const TrainResult result = train(cloud.points, cfg, sink);
  const auto t1 = std::chrono::steady_clock::now();
  if (!a.checkpoint.empty()) save_checkpoint(result.field, a.checkpoint);

  const ExtractResult extracted = marching_cubes(result.field, result.transform, mc_res);
  if (extracted.empty_warning) std::fprintf(stderr, "warning: extracted mesh is empty\n");
  write_mesh(a.output, extracted.mesh);
  const auto t2 = std::chrono::steady_clock::now();
  if (log.is_open() && !log) throw IoError("failed writing " + a.log);

  const auto seconds = [](auto from, auto to) { return std::chrono::duration<double>(to - from).count(); };
  json outputs = {{"mesh", a.output}};
  if (!a.checkpoint.empty()) outputs["checkpoint"] = a.checkpoint;
  if (!a.log.empty()) outputs["log"] = a.log;
  const json manifest = {
      {"config", config_json(cfg, mc_res)},
      {"input", {{"path", a.input}, {"sha256", sha256_file(a.input)}, {"points", cloud.points.size()}}},
      {"seed", cfg.seed},
      {"timings", {{"train_s", seconds(t0, t1)}, {"extract_s", seconds(t1, t2)}, {"total_s", seconds(t0, t2)}}},
      {"final_loss", loss_json(result.final_loss)},
      {"mesh", {{"vertices", extracted.mesh.vertices.size()}, {"triangles", extracted.mesh.triangles.size()}}},
      {"outputs", outputs}};
  write_json(a.manifest.empty() ? a.output + ".manifest.json" : a.manifest, manifest);
  std::fprintf(stderr, "wrote %s (%zu vertices, %zu triangles)\n", a.output.c_str(), extracted.mesh.vertices.size(),
               extracted.mesh.triangles.size());
  return 0;
}

// Reference geometry for eval: a mesh is sampled, a point cloud is used as is.
SampledSurface load_reference(const std::string& path, std::size_t samples, std::uint64_t seed) {
  const std::string ext = fs::path(path).extension().string();
  if (ext != ".xyz") {
    const Mesh mesh = read_mesh(path);
    if (!mesh.triangles.empty()) return sample_mesh_surface(mesh, samples, seed);
  }
  const PointCloud cloud = read_point_cloud(path);
  return {cloud.points, cloud.normals};
}

int run_eval(const std::string& mesh_path, const std::string& gt_path, std::size_t samples, double tau,
             std::uint64_t seed, const std::string& output) {
  const Mesh mesh = read_mesh(mesh_path);
  if (mesh.triangles.empty()) throw InvalidInput(mesh_path + ": mesh has no triangles");
  const SampledSurface rec = sample_mesh_surface(mesh, samples, seed);
  const SampledSurface ref = load_reference(gt_path, samples, seed + 1);

  const auto cd = chamfer(rec.points, ref.points);
  const auto hd = hausdorff(rec.points, ref.points);
  json result = {{"cd_l1", cd.cd_l1},
                 {"cd_l2", cd.cd_l2},
                 {"hd", hd.hd},
                 {"d_c", hd.one_sided_mean},
                 {"d_h", hd.one_sided_max},
                 {"fscore", f_score(rec.points, ref.points, tau)}};
  result["nc"] = ref.normals.empty() ? json(nullptr) : json(normal_consistency(rec, ref));
  if (output.empty()) {
    std::cout << result.dump(2) << '\n';
  } else {
    write_json(output, result);
  }
  return 0;
}

int run_synth(const std::string& kind, std::size_t n, double noise, std::uint64_t seed, const std::string& output) {
  const SynthShape shape = synth_shape(parse_shape_kind(kind), {}, n, noise, seed);
  write_point_cloud(output, shape.cloud);
  return 0;
}

int run_info(const std::string& path) {
  const DistanceField f = load_checkpoint(path);
  const auto count = [](const std::vector<std::uint8_t>& m) {
    std::size_t n = 0;
    for (auto b : m) n += b != 0;
    return n;
  };
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (std::int64_t v : f.parameter_vertices) {
    const double d = f.values[v];
    lo = first ? d : std::min(lo, d);
    hi = first ? d : std::max(hi, d);
    first = false;
  }
  const Vec3 a = f.grid.bbox_min();
  const Vec3 b = f.grid.bbox_max();
  std::printf("resolution       %d\n", f.grid.resolution());
  std::printf("bbox             [%g %g %g] - [%g %g %g]\n", a.x, a.y, a.z, b.x, b.y, b.z);
  std::printf("cells            %lld\n", static_cast<long long>(f.grid.cell_count()));
  std::printf("band m1 cells    %zu\n", count(f.cell_band_m1));
  std::printf("band m2 cells    %zu\n", count(f.cell_band_m2));
  std::printf("optimized        %zu of %lld vertices\n", f.parameter_count(),
              static_cast<long long>(f.grid.vertex_count()));
  if (!first) std::printf("value range      [%g, %g]\n", lo, hi);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GridPull: surface reconstruction by optimizing a discrete distance grid"};
  app.require_subcommand(1);
  // Config values live in per-subcommand tables, e.g. [reconstruct]. Fallthrough
  // lets --config appear after the subcommand name too.
  app.set_config("--config", "", "TOML file with option defaults");
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware default)")->check(CLI::NonNegativeNumber);

  TrainConfig cfg;
  cfg.deterministic = false;
  ReconstructArgs ra;
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct a mesh from a point cloud");
  rec->add_option("input", ra.input, "Point cloud (.xyz, .ply, .obj)")->required();
  rec->add_option("-o,--output", ra.output, "Output mesh (.ply, .obj)")->required();
  rec->add_option("--resolution", cfg.resolution, "Grid cells per axis")->capture_default_str();
  rec->add_option("--m1", cfg.m1, "Query band width in cells")->capture_default_str();
  rec->add_option("--m2", cfg.m2, "TV band width in cells")->capture_default_str();
  rec->add_option("--iters", cfg.iterations, "Optimization iterations")->capture_default_str();
  rec->add_option("--queries", cfg.queries_per_iter, "Queries per iteration")->capture_default_str();
  rec->add_option("--lr", cfg.lr0, "Initial learning rate (cells of a 256-grid per step)")->capture_default_str();
  rec->add_option("--decay", cfg.decay, "Learning-rate decay factor")->capture_default_str();
  rec->add_option("--decay-every", cfg.decay_every, "Iterations between decays")->capture_default_str();
  rec->add_option("--alpha", cfg.weights.alpha, "TV weight")->capture_default_str();
  rec->add_option("--beta", cfg.weights.beta, "Surface weight")->capture_default_str();
  rec->add_option("--gamma", cfg.weights.gamma, "Gradient-consistency weight")->capture_default_str();
  rec->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  rec->add_option("--sphere-radius", cfg.sphere_radius_cells, "Initial sphere radius in cells")
      ->capture_default_str();
  rec->add_option("--mc-resolution", ra.mc_resolution, "Marching-cubes resolution (default min(R, 256))");
  rec->add_flag("--noise-preset", ra.noise_preset, "Raise the TV weight to 2 for noisy input");
  rec->add_flag("--deterministic", ra.deterministic, "Ordered gradient reduction (bit-reproducible)");
  rec->add_flag("--lr-absolute", ra.lr_absolute, "Apply --lr in normalized units instead of reference-grid cells");
  rec->add_flag("--no-enclosed-sign", ra.no_enclosed_sign, "Keep the plain sphere initialization");
  rec->add_option("--checkpoint", ra.checkpoint, "Write the optimized field here");
  rec->add_option("--log", ra.log, "Per-iteration CSV log");
  rec->add_option("--manifest", ra.manifest, "Run manifest (default <output>.manifest.json)");
  rec->add_option("--progress-every", ra.progress_every, "Progress line interval (0 = silent)")
      ->capture_default_str();

  std::string eval_mesh;
  std::string eval_gt;
  std::string eval_out;
  std::size_t eval_samples = 100000;
  double eval_tau = 0.002;
  std::uint64_t eval_seed = 0;
  auto* ev = app.add_subcommand("eval", "Compare a mesh against ground truth");
  ev->add_option("mesh", eval_mesh, "Reconstructed mesh")->required();
  ev->add_option("gt", eval_gt, "Ground-truth mesh or point cloud")->required();
  ev->add_option("--samples", eval_samples, "Surface samples per mesh")->capture_default_str();
  ev->add_option("--fscore-tau", eval_tau, "F-score distance threshold")->capture_default_str();
  ev->add_option("--seed", eval_seed, "Sampling seed")->capture_default_str();
  ev->add_option("-o,--output", eval_out, "JSON output (default stdout)");

  std::string synth_kind;
  std::size_t synth_n = 100000;
  double synth_noise = 0.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* sy = app.add_subcommand("synth", "Sample an analytic shape");
  sy->add_option("kind", synth_kind, "sphere, cube, torus or plane")->required();
  sy->add_option("-n", synth_n, "Point count")->capture_default_str();
  sy->add_option("--noise", synth_noise, "Gaussian noise standard deviation")->capture_default_str();
  sy->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  sy->add_option("-o,--output", synth_out, "Output cloud (.xyz, .ply, .obj)")->required();

  std::string info_path;
  auto* in = app.add_subcommand("info", "Describe a checkpoint");
  in->add_option("checkpoint", info_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  if (threads > 0) omp_set_num_threads(threads);
  try {
    if (*rec) return run_reconstruct(cfg, ra);
    if (*ev) return run_eval(eval_mesh, eval_gt, eval_samples, eval_tau, eval_seed, eval_out);
    if (*sy) return run_synth(synth_kind, synth_n, synth_noise, synth_seed, synth_out);
    if (*in) return run_info(info_path);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  return 0;
}

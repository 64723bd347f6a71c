// splatr command-line interface: walkthrough, unshuffle, eval and export-ply.

#include "splatr/io.hpp"
#include "splatr/pipeline.hpp"
#include "splatr/workspace.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace splatr;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> difficulty;
  std::optional<int> iterations;
  std::optional<int> shuffle_count;
  std::optional<std::string> matcher;
};

void add_overrides(CLI::App* cmd, Overrides& o, bool scene) {
  cmd->add_option("--config", o.config_file, "JSON config file (missing keys keep their defaults)");
  if (!scene) {
    cmd->add_option("--seed", o.seed, "episode seed for the shuffle draw (default: the walkthrough seed)");
    return;
  }
  cmd->add_option("--seed", o.seed, "scene seed");
  cmd->add_option("--difficulty", o.difficulty, "easy or ambiguous")->check(CLI::IsMember({"easy", "ambiguous"}));
  cmd->add_option("--iterations", o.iterations, "splat training iterations");
}

pipeline::Config load_config(const Overrides& o, const std::optional<fs::path>& fallback = std::nullopt) {
  json j = json::object();
  if (!o.config_file.empty())
    j = workspace::read_json(o.config_file);
  else if (fallback && fs::exists(*fallback))
    j = workspace::read_json(*fallback);
  pipeline::Config cfg = pipeline::config_from_json(j);
  if (o.seed) cfg.seed = *o.seed;
  if (o.difficulty) cfg.difficulty = pipeline::difficulty_from_string(*o.difficulty);
  if (o.iterations) cfg.train.iterations = *o.iterations;
  if (o.shuffle_count) cfg.shuffle_count = *o.shuffle_count;
  if (o.matcher) cfg.matcher = pipeline::matcher_from_string(*o.matcher);
  cfg.validate();
  return cfg;
}

json training_json(const pipeline::SplatResult& s, size_t frames) {
  json j;
  j["frames"] = frames;
  j["training_views"] = s.report.final_psnr.size();
  j["gaussians"] = s.state.cloud.size();
  j["iterations"] = s.state.iteration;
  j["final_loss"] = s.report.loss.empty() ? 0.0 : s.report.loss.back();
  double lo = 0.0, mean = 0.0;
  if (!s.report.final_psnr.empty()) {
    lo = *std::min_element(s.report.final_psnr.begin(), s.report.final_psnr.end());
    for (double p : s.report.final_psnr) mean += p;
    mean /= static_cast<double>(s.report.final_psnr.size());
  }
  j["psnr_min"] = lo;
  j["psnr_mean"] = mean;
  j["psnr"] = s.report.final_psnr;
  return j;
}

json pair_json(const assign::Pair& p) {
  return json{{"shuffled_node", p.shuffled_id}, {"goal_node", p.goal_id}, {"similarity", p.similarity}};
}

json episode_json(const pipeline::UnshuffleResult& r) {
  json j;
  j["steps"] = r.steps;
  j["detections"] = r.detections;
  j["exploration_exhausted"] = r.exploration.exhausted;
  j["pairs"] = json::array();
  for (const auto& p : r.match.pairs) j["pairs"].push_back(pair_json(p));
  j["skipped"] = json::array();
  for (const auto& p : r.plan.skipped) j["skipped"].push_back(pair_json(p));
  j["actions"] = json::array();
  for (const auto& o : r.outcomes) {
    json a = pair_json(o.planned.pair);
    a["pick"] = {o.planned.pick.x(), o.planned.pick.y(), o.planned.pick.z()};
    a["place"] = {o.planned.place.x(), o.planned.place.y(), o.planned.place.z()};
    a["status"] = o.status;
    a["object"] = o.picked ? json(*o.picked) : json(nullptr);
    j["actions"].push_back(a);
  }
  return j;
}

int cmd_walkthrough(const Overrides& o, const fs::path& root, const std::string& import_dir) {
  const workspace::Layout ws{root};
  pipeline::Config cfg = load_config(o);
  fs::create_directories(root);
  workspace::Manifest manifest;
  workspace::write_json(ws.config(), pipeline::to_json(cfg));
  manifest.add(root, ws.config());

  if (import_dir.empty()) {
    const sim::SynthScene scene = sim::generate_scene(cfg.seed, cfg.difficulty);
    workspace::write_json(ws.scene(), pipeline::to_json(scene));
    manifest.add(root, ws.scene());
    sim::Simulator simulator(scene, cfg.camera);
    const pipeline::Walkthrough walk = pipeline::record_walkthrough(simulator, cfg.seed, cfg.walkthrough_steps);
    if (!walk.exploration.exhausted)
      manifest.warn("walkthrough step budget (" + std::to_string(cfg.walkthrough_steps) +
                    ") ran out before exploration finished; dataset is partial");
    workspace::write_dataset(ws.dataset(), walk.frames);
  } else {
    // Imported posed dataset: training proceeds without exploration.
    workspace::write_dataset(ws.dataset(), workspace::read_dataset(import_dir));
  }
  // Train on the frames as stored, so a re-import of the dataset reproduces the checkpoint.
  const auto frames = workspace::read_dataset(ws.dataset());
  for (const auto& entry : fs::recursive_directory_iterator(ws.dataset()))
    if (entry.is_regular_file()) manifest.add(root, entry.path());

  const pipeline::SplatResult splat = pipeline::train_splat(frames, cfg);
  io::write_checkpoint(ws.checkpoint(), splat.state);
  manifest.add(root, ws.checkpoint());
  const json training = training_json(splat, frames.size());
  workspace::write_json(ws.training(), training);
  manifest.add(root, ws.training());
  workspace::write_manifest(ws, manifest);

  std::printf("walkthrough: %zu frames, %zu training views, %zu Gaussians, PSNR min %.2f mean %.2f dB\n",
              frames.size(), splat.report.final_psnr.size(), splat.state.cloud.size(),
              training["psnr_min"].get<double>(), training["psnr_mean"].get<double>());
  for (const auto& w : manifest.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("checkpoint: %s\n", ws.checkpoint().string().c_str());
  return 0;
}

int cmd_unshuffle(const Overrides& o, const fs::path& root, const std::string& shuffle_file) {
  const workspace::Layout ws{root};
  if (!fs::exists(ws.checkpoint())) throw std::runtime_error("missing checkpoint " + ws.checkpoint().string());
  if (!fs::exists(ws.scene()))
    throw std::runtime_error("unshuffle runs in the synthetic simulator and needs " + ws.scene().string());
  pipeline::Config cfg = load_config(o, ws.config());
  const sim::SynthScene goal = pipeline::scene_from_json(workspace::read_json(ws.scene()));
  const train::TrainState state = io::read_checkpoint(ws.checkpoint());

  const sim::ShuffleSpec spec = shuffle_file.empty() ? pipeline::episode_shuffle(goal, cfg)
                                                     : pipeline::shuffle_from_json(workspace::read_json(shuffle_file));
  const sim::SynthScene shuffled = sim::shuffle(goal, spec);

  workspace::Manifest manifest = workspace::read_manifest(ws);
  workspace::write_json(ws.shuffle(), pipeline::to_json(spec));
  manifest.add(root, ws.shuffle());

  change::ConceptTable table;
  if (cfg.feature_backend == "file" && fs::exists(fs::path(cfg.embeddings_dir) / "concepts.json"))
    table = io::read_concepts(fs::path(cfg.embeddings_dir) / "concepts.json");
  else
    table = pipeline::synthetic_concepts(goal, change::ColorHistogramEmbedder());
  io::write_concepts(ws.embeddings() / "concepts.json", table);
  manifest.add(root, ws.embeddings() / "concepts.json");

  const pipeline::UnshuffleResult r = pipeline::run_unshuffle(state.cloud, goal, shuffled, &table, cfg);
  if (!r.exploration.exhausted)
    manifest.warn("unshuffle step budget (" + std::to_string(cfg.unshuffle_steps) +
                  ") ran out before exploration finished");
  workspace::write_nodes(ws.nodes(), r.nodes);
  for (const auto& entry : fs::directory_iterator(ws.nodes())) manifest.add(root, entry.path());
  workspace::write_json(ws.episode(), episode_json(r));
  manifest.add(root, ws.episode());
  workspace::write_json(ws.report(), pipeline::to_json(r.report));
  manifest.add(root, ws.report());
  workspace::write_manifest(ws, manifest);

  std::printf("unshuffle (%s): %zu shuffled, %d nodes, %zu pairs, %zu actions\n", r.report.matcher.c_str(),
              spec.changes.size(), static_cast<int>(r.nodes.size()), r.match.pairs.size(), r.outcomes.size());
  std::printf("success %.0f  fixed %.3f  fixed_strict %.3f  misplaced %.3f  energy_remaining %.3f\n", r.report.success,
              r.report.fixed, r.report.fixed_strict, r.report.misplaced, r.report.energy_remaining);
  std::printf("report: %s\n", ws.report().string().c_str());
  return 0;
}

int cmd_eval(const std::vector<std::string>& paths, const std::string& json_out, const std::string& csv_out) {
  std::vector<assign::EpisodeReport> reports;
  for (const auto& p : paths) reports.push_back(pipeline::report_from_json(workspace::read_json(p)));
  const pipeline::Aggregate agg = pipeline::aggregate(reports);
  const std::string csv = pipeline::aggregate_csv(paths, reports, agg);
  std::printf("%-40s %8s %8s %12s %10s %8s\n", "report", "success", "fixed", "fixed_strict", "misplaced", "energy");
  for (size_t i = 0; i < reports.size(); ++i)
    std::printf("%-40s %8.3f %8.3f %12.3f %10.3f %8.3f\n", paths[i].c_str(), reports[i].success, reports[i].fixed,
                reports[i].fixed_strict, reports[i].misplaced, reports[i].energy_remaining);
  std::printf("%-40s %8.3f %8.3f %12.3f %10.3f %8.3f\n", "mean", agg.success, agg.fixed, agg.fixed_strict,
              agg.misplaced, agg.energy_remaining);
  if (!json_out.empty()) workspace::write_json(json_out, pipeline::to_json(agg));
  if (!csv_out.empty()) io::write_file(csv_out, csv);
  return 0;
}

int cmd_export_ply(const fs::path& root, const std::string& checkpoint, const std::string& out) {
  const fs::path ckpt = checkpoint.empty() ? workspace::Layout{root}.checkpoint() : fs::path(checkpoint);
  if (!fs::exists(ckpt)) throw std::runtime_error("missing checkpoint " + ckpt.string());
  const train::TrainState state = io::read_checkpoint(ckpt);
  io::export_ply(out, state.cloud);
  std::printf("wrote %zu Gaussians to %s\n", state.cloud.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splatr: Gaussian-splat scene rearrangement on a synthetic simulator"};
  app.require_subcommand(1);

  Overrides walk_o;
  std::string walk_ws, import_dir;
  auto* walk = app.add_subcommand("walkthrough", "explore the goal scene, record a dataset and train the splat");
  walk->add_option("--workspace,-w", walk_ws, "workspace directory")->required();
  walk->add_option("--dataset", import_dir, "import a posed dataset instead of exploring")->check(CLI::ExistingDirectory);
  add_overrides(walk, walk_o, true);

  Overrides un_o;
  std::string un_ws, shuffle_file;
  auto* un = app.add_subcommand("unshuffle", "restore a shuffled episode using the trained splat");
  un->add_option("--workspace,-w", un_ws, "workspace directory")->required();
  un->add_option("--shuffle", shuffle_file, "shuffle spec JSON (default: drawn from the seed)")->check(CLI::ExistingFile);
  un->add_option("--matcher", un_o.matcher, "hungarian or greedy")->check(CLI::IsMember({"hungarian", "greedy"}));
  un->add_option("--shuffle-count", un_o.shuffle_count, "objects to shuffle (0: drawn from the seed)");
  add_overrides(un, un_o, false);

  std::vector<std::string> reports;
  std::string json_out, csv_out;
  auto* ev = app.add_subcommand("eval", "aggregate episode reports");
  ev->add_option("reports", reports, "report.json files")->required()->check(CLI::ExistingFile);
  ev->add_option("--json", json_out, "write the aggregate as JSON");
  ev->add_option("--csv", csv_out, "write per-report rows and the mean as CSV");

  std::string ply_ws, ply_ckpt, ply_out;
  auto* ply = app.add_subcommand("export-ply", "write the splat as a viewer-compatible PLY");
  ply->add_option("--workspace,-w", ply_ws, "workspace directory");
  ply->add_option("--checkpoint", ply_ckpt, "checkpoint file (overrides --workspace)");
  ply->add_option("--out,-o", ply_out, "output PLY path")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*walk) return cmd_walkthrough(walk_o, fs::absolute(walk_ws), import_dir);
    if (*un) return cmd_unshuffle(un_o, fs::absolute(un_ws), shuffle_file);
    if (*ev) return cmd_eval(reports, json_out, csv_out);
    if (*ply) {
      if (ply_ws.empty() && ply_ckpt.empty()) throw std::runtime_error("export-ply needs --workspace or --checkpoint");
      return cmd_export_ply(ply_ws, ply_ckpt, ply_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

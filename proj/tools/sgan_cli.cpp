// Command-line driver for the pipeline stages.
//
// Subcommands: gen-data, train-baseline, make-seeds, train-sgan, train-seg,
// eval, viz. Every subcommand takes --config (JSON) plus repeatable
// --set group.key=value overrides; stages write their artifacts into --run.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure.
// SGAN_LOG=quiet|info|debug controls stderr verbosity (default info).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgan/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgan;

namespace {

int log_level() {
  const char* e = std::getenv("SGAN_LOG");
  if (!e) return 1;
  std::string s(e);
  if (s == "quiet") return 0;
  if (s == "debug") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "%s\n", msg.c_str());
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
  return j;
}

// --set a.b.c=value ; the value is parsed as a JSON literal, falling back to
// a plain string so --set run.variant=SGAN works unquoted.
void apply_override(json& j, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* cur = &j;
  size_t pos = 0;
  while (true) {
    auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (part.empty()) throw std::invalid_argument("--set: empty key segment in '" + key + "'");
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      break;
    }
    cur = &(*cur)[part];
    pos = dot + 1;
  }
}

PipelineConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& sets, json* out_json) {
  json j = config_path.empty() ? json::object() : load_json_file(config_path);
  for (const auto& kv : sets) apply_override(j, kv);
  PipelineConfig cfg = config_from_json(j);
  if (out_json) *out_json = config_to_json(cfg);
  return cfg;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

struct RunDir {
  std::string root;

  explicit RunDir(std::string r) : root(std::move(r)) {
    fs::create_directories(root);
    fs::create_directories(root + "/checkpoints");
    fs::create_directories(root + "/seeds");
    fs::create_directories(root + "/viz");
  }
  std::string ckpt(const std::string& name) const { return root + "/checkpoints/" + name; }
  std::string seeds_dir(const std::string& stage) const {
    auto d = root + "/seeds/" + stage;
    fs::create_directories(d);
    return d;
  }

  void save_config(const json& j) const {
    write_text_file(root + "/config.json", j.dump(2) + "\n");
  }

  // train.log accumulates one JSON object per line across stages
  LogFn logger(const std::string& stage) const {
    std::string path = root + "/train.log";
    return [path, stage](const nlohmann::ordered_json& entry) {
      nlohmann::ordered_json line;
      line["stage"] = stage;
      for (const auto& [k, v] : entry.items()) line[k] = v;
      std::ofstream out(path, std::ios::app);
      if (!out) throw std::runtime_error("cannot append to '" + path + "'");
      out << line.dump() << "\n";
      if (log_level() >= 2) std::fprintf(stderr, "%s\n", line.dump().c_str());
    };
  }

  void merge_metrics(const std::string& key, const json& value) const {
    const std::string path = root + "/metrics.json";
    json all = json::object();
    if (fs::exists(path)) all = load_json_file(path);
    all[key] = value;
    write_text_file(path, all.dump(2) + "\n");
  }
};

// Rebuilds the stage-0/1 model for a checkpoint: the baseline checkpoint uses
// baseline wiring, the sgan checkpoint the configured variant's wiring.
SganModel<float> load_model(const PipelineConfig& cfg, const Dataset& ds,
                            const std::string& base, bool baseline_wiring) {
  VariantWiring w = baseline_wiring ? wiring_for(Variant::kBaseline, cfg.lambda)
                                    : wiring_for(cfg.variant, cfg.lambda);
  ModelConfig mc;
  mc.backbone = cfg.backbone;
  mc.num_classes = ds.num_classes;
  mc.use_attention = w.use_attention;
  mc.all_salient = w.all_salient;
  mc.seg_branch = w.seg_branch;
  mc.t_b = cfg.t_b;
  SganModel<float> model(mc, cfg.rng_seed);
  auto state = load_checkpoint(base);
  auto params = model.parameters();
  copy_state(state, params);
  return model;
}

SegNet<float> load_segnet(const PipelineConfig& cfg, const Dataset& ds,
                          const std::string& base) {
  SegNet<float> model(cfg.backbone, ds.num_classes, cfg.rng_seed);
  auto state = load_checkpoint(base);
  auto params = model.parameters();
  copy_state(state, params);
  return model;
}

std::vector<GrayImage> load_seed_masks(const std::string& dir, const Dataset& ds) {
  std::vector<GrayImage> out;
  out.reserve(ds.train.size());
  for (const Sample& s : ds.train) {
    const std::string path = dir + "/" + s.id + ".pgm";
    if (!fs::exists(path))
      throw std::runtime_error("missing seed mask '" + path +
                               "' (run make-seeds for this stage first)");
    out.push_back(read_pgm(path));
  }
  return out;
}

void write_seed_masks(const std::string& dir, const Dataset& ds,
                      const std::vector<GrayImage>& masks) {
  for (size_t i = 0; i < masks.size(); ++i)
    write_pgm(dir + "/" + ds.train[i].id + ".pgm", masks[i]);
}

Dataset load_data(const PipelineConfig& cfg, const std::string& dir) {
  Dataset ds = load_dataset(dir);
  apply_semi_fraction(ds, cfg.semi_fraction);
  return ds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saliency-guided attention segmentation pipeline"};
  app.require_subcommand(1);

  std::string config_path, data_dir, run_dir, out_dir;
  std::vector<std::string> sets;
  std::string stage = "final", source, ckpt_name, sample_id, what, pixel;
  int viz_class = 1;

  auto add_common = [&](CLI::App* sub, bool needs_data, bool needs_run) {
    sub->add_option("--config", config_path, "pipeline config JSON");
    sub->add_option("--set", sets, "override config entries, group.key=value")
        ->take_all();
    if (needs_data)
      sub->add_option("--data", data_dir, "dataset directory")->required();
    if (needs_run) sub->add_option("--run", run_dir, "run directory")->required();
  };

  auto* c_gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(c_gen, false, false);
  c_gen->add_option("--out", out_dir, "output dataset directory")->required();

  auto* c_base = app.add_subcommand("train-baseline", "stage 0: train the plain classifier");
  add_common(c_base, true, true);

  auto* c_seeds = app.add_subcommand("make-seeds", "derive seed masks from a checkpoint");
  add_common(c_seeds, true, true);
  c_seeds->add_option("--stage", stage, "initial|final (default final)");
  c_seeds->add_option("--source", source, "final-seed source: cls|seg|ensemble");
  c_seeds->add_option("--ckpt", ckpt_name, "checkpoint name (default: initial->baseline, final->sgan)");

  auto* c_sgan = app.add_subcommand("train-sgan", "stage 1: train the attention model");
  add_common(c_sgan, true, true);

  auto* c_seg = app.add_subcommand("train-seg", "stage 3: train the segmentation network");
  add_common(c_seg, true, true);

  auto* c_eval = app.add_subcommand("eval", "evaluate artifacts into metrics.json");
  add_common(c_eval, true, true);
  c_eval->add_option("--what", what, "cls|seeds-initial|seeds-final|seg")->required();
  c_eval->add_option("--ckpt", ckpt_name, "checkpoint for --what cls (default baseline)");

  auto* c_viz = app.add_subcommand("viz", "write heatmap images");
  add_common(c_viz, true, true);
  c_viz->add_option("--ckpt", ckpt_name, "baseline|sgan (default sgan)");
  c_viz->add_option("--id", sample_id, "sample id, e.g. train_0003")->required();
  c_viz->add_option("--what", what, "cam|attention")->required();
  c_viz->add_option("--class", viz_class, "class for --what cam (1-based)");
  c_viz->add_option("--pixel", pixel, "r,c feature-grid pixel for --what attention");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json resolved;
    PipelineConfig cfg = resolve_config(config_path, sets, &resolved);

    if (c_gen->parsed()) {
      info("generating dataset into " + out_dir);
      Dataset ds = generate_dataset(cfg.dataset);
      save_dataset(out_dir, ds);
      info("wrote " + std::to_string(ds.train.size()) + " train / " +
           std::to_string(ds.val.size()) + " val samples");
    } else if (c_base->parsed()) {
      RunDir run(run_dir);
      run.save_config(resolved);
      Dataset ds = load_data(cfg, data_dir);
      info("training baseline (" + std::to_string(cfg.baseline_iterations) + " steps)");
      auto model = train_baseline(cfg, ds, run.logger("baseline"));
      save_checkpoint(run.ckpt("baseline"), model.parameters());
      info("saved " + run.ckpt("baseline") + ".bin");
    } else if (c_seeds->parsed()) {
      RunDir run(run_dir);
      Dataset ds = load_data(cfg, data_dir);
      if (stage == "initial") {
        auto model = load_model(cfg, ds, run.ckpt(ckpt_name.empty() ? "baseline" : ckpt_name),
                                ckpt_name.empty() || ckpt_name == "baseline");
        auto masks = make_initial_seeds(cfg, model, ds);
        write_seed_masks(run.seeds_dir("initial"), ds, masks);
        info("wrote " + std::to_string(masks.size()) + " initial seed masks");
      } else if (stage == "final") {
        const bool baseline_wiring = ckpt_name == "baseline";
        auto model = load_model(cfg, ds, run.ckpt(ckpt_name.empty() ? "sgan" : ckpt_name),
                                baseline_wiring);
        SeedSource src = source.empty()
                             ? (baseline_wiring ? SeedSource::kCls
                                                : default_seed_source(cfg.variant))
                             : parse_seed_source(source);
        auto masks = make_final_seeds(cfg, model, ds, src);
        write_seed_masks(run.seeds_dir("final"), ds, masks);
        info("wrote " + std::to_string(masks.size()) + " final seed masks");
      } else {
        throw std::invalid_argument("--stage must be initial or final, got '" + stage + "'");
      }
    } else if (c_sgan->parsed()) {
      RunDir run(run_dir);
      run.save_config(resolved);
      Dataset ds = load_data(cfg, data_dir);
      auto baseline_state = load_checkpoint(run.ckpt("baseline"));
      VariantWiring w = wiring_for(cfg.variant, cfg.lambda);
      std::vector<GrayImage> seeds;
      if (w.seg_branch && w.lambda > 0)
        seeds = load_seed_masks(run.root + "/seeds/initial", ds);
      info(std::string("training variant ") + variant_name(cfg.variant) + " (" +
           std::to_string(cfg.sgan_iterations) + " steps)");
      auto model = train_sgan(cfg, ds, baseline_state,
                              seeds.empty() ? nullptr : &seeds, run.logger("sgan"));
      save_checkpoint(run.ckpt("sgan"), model.parameters());
      info("saved " + run.ckpt("sgan") + ".bin");
    } else if (c_seg->parsed()) {
      RunDir run(run_dir);
      run.save_config(resolved);
      Dataset ds = load_data(cfg, data_dir);
      auto seeds = load_seed_masks(run.root + "/seeds/final", ds);
      info("training segmentation network (" + std::to_string(cfg.seg_iterations) +
           " steps)");
      auto model = train_seg(cfg, ds, seeds, run.logger("seg"));
      save_checkpoint(run.ckpt("seg"), model.parameters());
      info("saved " + run.ckpt("seg") + ".bin");
    } else if (c_eval->parsed()) {
      RunDir run(run_dir);
      Dataset ds = load_data(cfg, data_dir);
      if (what == "cls") {
        const std::string name = ckpt_name.empty() ? "baseline" : ckpt_name;
        auto model = load_model(cfg, ds, run.ckpt(name), name == "baseline");
        json r = {{"train", classification_accuracy(cfg, model, ds.train)},
                  {"val", classification_accuracy(cfg, model, ds.val)}};
        run.merge_metrics("classification_" + name, r);
        info("classification accuracy: " + r.dump());
      } else if (what == "seeds-initial" || what == "seeds-final") {
        const bool initial = what == "seeds-initial";
        auto masks = load_seed_masks(run.root + (initial ? "/seeds/initial" : "/seeds/final"), ds);
        auto rep = evaluate_seed_masks(masks, ds, initial ? cfg.backbone.stride() : 1);
        run.merge_metrics(initial ? "seeds_initial" : "seeds_final", to_json(rep));
        info("seed F-beta: " + std::to_string(rep.f));
      } else if (what == "seg") {
        auto model = load_segnet(cfg, ds, run.ckpt("seg"));
        auto rep = evaluate_segnet(cfg, model, ds.val, ds.num_classes);
        run.merge_metrics("segmentation", to_json(rep));
        info("val mIoU: " + std::to_string(rep.miou));
      } else {
        throw std::invalid_argument("--what must be cls, seeds-initial, seeds-final or seg");
      }
    } else if (c_viz->parsed()) {
      RunDir run(run_dir);
      Dataset ds = load_data(cfg, data_dir);
      const Sample* sample = nullptr;
      for (const auto& split : {&ds.train, &ds.val})
        for (const Sample& s : *split)
          if (s.id == sample_id) sample = &s;
      if (!sample) throw std::invalid_argument("no sample with id '" + sample_id + "'");
      const std::string name = ckpt_name.empty() ? "sgan" : ckpt_name;
      auto model = load_model(cfg, ds, run.ckpt(name), name == "baseline");
      if (what == "cam") {
        auto img = viz_cam(cfg, model, *sample, viz_class);
        const std::string path =
            run.root + "/viz/" + sample_id + "_cam" + std::to_string(viz_class) + ".pgm";
        write_pgm(path, img);
        info("wrote " + path);
      } else if (what == "attention") {
        int r = -1, c = -1;
        if (std::sscanf(pixel.c_str(), "%d,%d", &r, &c) != 2)
          throw std::invalid_argument("--pixel expects r,c (e.g. 7,4)");
        auto img = viz_attention_column(cfg, model, *sample, r, c);
        const std::string path = run.root + "/viz/" + sample_id + "_attn_" +
                                 std::to_string(r) + "_" + std::to_string(c) + ".pgm";
        write_pgm(path, img);
        info("wrote " + path);
      } else {
        throw std::invalid_argument("--what must be cam or attention");
      }
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

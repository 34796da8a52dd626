#include "memalign/config_io.hpp"

#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "memalign/error.hpp"

namespace memalign {

namespace {

using nlohmann::json;

// Walks one JSON object, hands out typed fields and rejects leftovers.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    consumed_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ConfigError(key_path(key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(key_path(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  std::optional<Section> child(const std::string& key) {
    if (const auto* v = find(key)) return Section(*v, key_path(key));
    return std::nullopt;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!consumed_.contains(key)) throw ConfigError(key_path(key), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> consumed_;
};

json config_json(const ExperimentConfig& c) {
  const auto& w = c.world;
  const auto& d = c.data;
  const auto& s = c.schedule;
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"num_seeds", c.num_seeds},
      {"out_dir", c.out_dir},
      {"world",
       {{"categories", w.categories},
        {"input_dim", w.input_dim},
        {"feature_dim", w.feature_dim},
        {"zipf_exponent", w.zipf_exponent},
        {"mean_scale", w.mean_scale},
        {"class_spread", w.class_spread},
        {"modes_per_class", w.modes_per_class},
        {"mode_scale", w.mode_scale},
        {"rotation_strength", w.rotation_strength},
        {"rotation_rank", w.rotation_rank},
        {"shift_norm", w.shift_norm},
        {"target_noise", w.target_noise}}},
      {"data",
       {{"source_images", d.source_images},
        {"target_images", d.target_images},
        {"test_per_category", d.test_per_category},
        {"min_instances", d.min_instances},
        {"max_instances", d.max_instances}}},
      {"schedule",
       {{"epochs", s.epochs},
        {"burn_in_epochs", s.burn_in_epochs},
        {"batch_size", s.batch_size},
        {"memory_update_fraction", s.memory_update_fraction},
        {"learning_rate", s.learning_rate},
        {"momentum", s.momentum},
        {"K", s.top_k},
        {"stop_similarity_gradient", s.stop_similarity_gradient},
        {"base_delta", s.base_delta},
        {"nms_iou", s.nms_iou}}},
      {"loss",
       {{"lambda1", s.weights.lambda1},
        {"lambda2", s.weights.lambda2},
        {"lambda3", s.weights.lambda3},
        {"margin", s.weights.margin}}},
      {"memory", {{"policy", std::string(to_string(s.storage.variant))}, {"gamma", s.storage.gamma}}},
  };
}

json breakdown_json(const LossBreakdown& b) {
  return json{{"l_sup", b.l_sup},
              {"l_unsup", b.l_unsup},
              {"l_dis", b.l_dis},
              {"l_ins", b.l_ins},
              {"total", b.total},
              {"sup_instances", b.sup_instances},
              {"unsup_instances", b.unsup_instances},
              {"dis_samples", b.dis_samples},
              {"ins_instances", b.ins_instances}};
}

json metrics_json(const MetricsReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"adapted", e.adapted},
                      {"steps", e.steps},
                      {"target_accuracy", e.target_accuracy},
                      {"losses", breakdown_json(e.mean_losses)}});
  }
  return json{
      {"target_accuracy", r.target_accuracy},
      {"target_accuracy_overall", r.target_accuracy_overall},
      {"initial_target_accuracy", r.initial_target_accuracy},
      {"source_accuracy", r.source_accuracy},
      {"target_accuracy_per_category", r.target_accuracy_per_category},
      {"miss_rate_minibatch", r.miss_rate_minibatch},
      {"miss_rate_memory", r.miss_rate_memory},
      {"miss_rate_memory_after_populated", r.miss_rate_memory_after_populated},
      {"logged_batches", r.logged_batches},
      {"filtered_targets", r.filtered_targets},
      {"filtered_targets_after_populated", r.filtered_targets_after_populated},
      {"memory_misses", r.memory_misses},
      {"skipped_alignment_steps", r.skipped_alignment_steps},
      {"first_populated_step", r.first_populated_step ? json(*r.first_populated_step) : json(nullptr)},
      {"mean_pair_similarity", r.mean_pair_similarity},
      {"min_pair_similarity", r.min_pair_similarity},
      {"aligned_pairs", r.aligned_pairs},
      {"intra_class_variance_proxy", r.intra_class_variance_proxy},
      {"memory_counts", r.memory_counts},
      {"memory_capacities", r.memory_capacities},
      {"min_memory_count", r.min_memory_count},
      {"memory_generation", r.memory_generation},
      {"rebuilds", r.rebuilds},
      {"rebuilds_per_epoch", r.rebuilds_per_epoch},
      {"steps_per_epoch", r.steps_per_epoch},
      {"epochs", epochs},
  };
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }

  ExperimentConfig c;
  Section top(root, "");
  const auto* version = top.find("schema_version");
  if (version == nullptr) throw ConfigError("schema_version", "missing");
  if (!version->is_number_integer() || version->get<int>() != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported, expected " + std::to_string(kConfigSchemaVersion));
  }
  top.seed("seed", c.seed);
  top.count("num_seeds", c.num_seeds);
  top.string("out_dir", c.out_dir);

  if (auto w = top.child("world")) {
    w->count("categories", c.world.categories);
    w->count("input_dim", c.world.input_dim);
    w->count("feature_dim", c.world.feature_dim);
    w->number("zipf_exponent", c.world.zipf_exponent);
    w->number("mean_scale", c.world.mean_scale);
    w->number("class_spread", c.world.class_spread);
    w->count("modes_per_class", c.world.modes_per_class);
    w->number("mode_scale", c.world.mode_scale);
    w->number("rotation_strength", c.world.rotation_strength);
    w->count("rotation_rank", c.world.rotation_rank);
    w->number("shift_norm", c.world.shift_norm);
    w->number("target_noise", c.world.target_noise);
    w->finish();
  }
  if (auto d = top.child("data")) {
    d->count("source_images", c.data.source_images);
    d->count("target_images", c.data.target_images);
    d->count("test_per_category", c.data.test_per_category);
    d->count("min_instances", c.data.min_instances);
    d->count("max_instances", c.data.max_instances);
    d->finish();
  }
  if (auto s = top.child("schedule")) {
    s->count("epochs", c.schedule.epochs);
    s->count("burn_in_epochs", c.schedule.burn_in_epochs);
    s->count("batch_size", c.schedule.batch_size);
    s->number("memory_update_fraction", c.schedule.memory_update_fraction);
    s->number("learning_rate", c.schedule.learning_rate);
    s->number("momentum", c.schedule.momentum);
    s->count("K", c.schedule.top_k);
    s->boolean("stop_similarity_gradient", c.schedule.stop_similarity_gradient);
    s->number("base_delta", c.schedule.base_delta);
    s->number("nms_iou", c.schedule.nms_iou);
    s->finish();
  }
  if (auto l = top.child("loss")) {
    l->number("lambda1", c.schedule.weights.lambda1);
    l->number("lambda2", c.schedule.weights.lambda2);
    l->number("lambda3", c.schedule.weights.lambda3);
    l->number("margin", c.schedule.weights.margin);
    l->finish();
  }
  if (auto m = top.child("memory")) {
    std::string policy(to_string(c.schedule.storage.variant));
    m->string("policy", policy);
    c.schedule.storage.variant = storage_variant_from_string(policy);
    m->number("gamma", c.schedule.storage.gamma);
    m->finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ExperimentConfig& config, int indent) {
  return config_json(config).dump(indent) + "\n";
}

std::string report_to_json(const ExperimentConfig& config, const MetricsReport& report) {
  const json doc{{"schema", "memalign.report"},
                 {"schema_version", kReportSchemaVersion},
                 {"resolved_config", config_json(config)},
                 {"metrics", metrics_json(report)}};
  return doc.dump(2) + "\n";
}

std::string sweep_to_csv(const SweepTable& table) {
  std::ostringstream out;
  out << "param,value,seeds,target_accuracy_mean,target_accuracy_std,miss_rate_minibatch_mean,"
         "miss_rate_memory_mean,mean_pair_similarity,memory_size_mean\n";
  for (const auto& row : table.rows) {
    out << to_string(table.param) << ',' << row.value << ',' << row.runs.size() << ','
        << format_double(row.mean_target_accuracy()) << ',' << format_double(row.std_target_accuracy()) << ','
        << format_double(row.mean_miss_rate_minibatch()) << ','
        << format_double(row.mean_miss_rate_memory()) << ',' << format_double(row.mean_pair_similarity())
        << ',' << format_double(row.mean_memory_size()) << '\n';
  }
  return out.str();
}

std::string sweep_to_json(const ExperimentConfig& config, const SweepTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json runs = json::array();
    for (std::size_t i = 0; i < row.runs.size(); ++i) {
      runs.push_back({{"seed", row.seeds[i]}, {"metrics", metrics_json(row.runs[i])}});
    }
    rows.push_back({{"value", row.value},
                    {"target_accuracy_mean", row.mean_target_accuracy()},
                    {"target_accuracy_std", row.std_target_accuracy()},
                    {"runs", runs}});
  }
  const json doc{{"schema", "memalign.sweep"},
                 {"schema_version", kSweepSchemaVersion},
                 {"param", to_string(table.param)},
                 {"resolved_config", config_json(config)},
                 {"rows", rows}};
  return doc.dump(2) + "\n";
}

}  // namespace memalign

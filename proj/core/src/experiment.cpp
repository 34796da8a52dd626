#include "memalign/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <thread>

#include "memalign/error.hpp"
#include "memalign/retrieval.hpp"

namespace memalign {

namespace {

Rng named_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

std::vector<std::size_t> category_counts(std::span<const SyntheticImage> images, std::size_t categories) {
  std::vector<std::size_t> counts(categories, 0);
  for (const auto& image : images) {
    for (const auto& inst : image.instances) ++counts[static_cast<std::size_t>(inst.category)];
  }
  return counts;
}

FeatureVector to_feature(const Eigen::VectorXd& v) {
  return FeatureVector(std::vector<double>(v.data(), v.data() + v.size()));
}

struct RebuildOutcome {
  MemoryBank bank;
  std::vector<double> per_category_accuracy;
};

// Full memory pass over the source set with the current extractor and head.
// The same pass supplies per-category source accuracy for the thresholds.
RebuildOutcome rebuild_from_source(const ToyModel& model, const MemoryBank& previous,
                                   std::span<const SyntheticImage> source) {
  MemoryBuilder builder(previous);
  const std::size_t cats = previous.categories();
  std::vector<std::size_t> correct(cats, 0);
  std::vector<std::size_t> seen(cats, 0);
  for (const auto& image : source) {
    for (std::size_t j = 0; j < image.instances.size(); ++j) {
      const auto& inst = image.instances[j];
      const Eigen::VectorXd f = model.extract(inst.input);
      Eigen::Index predicted = 0;
      model.logits(f).maxCoeff(&predicted);
      const auto c = static_cast<std::size_t>(inst.category);
      ++seen[c];
      if (predicted == inst.category) ++correct[c];
      builder.add({to_feature(f), inst.category, static_cast<int>(predicted), image.image_id,
                   static_cast<std::uint32_t>(j)});
    }
  }
  std::vector<double> accuracy(cats, 0.0);
  for (std::size_t c = 0; c < cats; ++c) {
    if (seen[c] > 0) accuracy[c] = static_cast<double>(correct[c]) / static_cast<double>(seen[c]);
  }
  return {std::move(builder).finish(), std::move(accuracy)};
}

void add_breakdown(LossBreakdown& acc, const LossBreakdown& b) {
  acc.l_sup += b.l_sup;
  acc.l_unsup += b.l_unsup;
  acc.l_dis += b.l_dis;
  acc.l_ins += b.l_ins;
  acc.total += b.total;
  acc.sup_instances += b.sup_instances;
  acc.unsup_instances += b.unsup_instances;
  acc.dis_samples += b.dis_samples;
  acc.ins_instances += b.ins_instances;
}

template <typename F>
double mean_of(const std::vector<MetricsReport>& runs, F field) {
  if (runs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : runs) sum += static_cast<double>(field(r));
  return sum / static_cast<double>(runs.size());
}

}  // namespace

void DataParams::validate() const {
  if (source_images == 0) throw ConfigError("source_images", "must be at least 1");
  if (target_images == 0) throw ConfigError("target_images", "must be at least 1");
  if (test_per_category == 0) throw ConfigError("test_per_category", "must be at least 1");
  if (min_instances == 0) throw ConfigError("min_instances", "must be at least 1");
  if (max_instances < min_instances) throw ConfigError("max_instances", "must be >= min_instances");
}

void ExperimentConfig::validate() const {
  if (num_seeds == 0) throw ConfigError("num_seeds", "must be at least 1");
  world.validate();
  data.validate();
  schedule.validate();
  const std::size_t source_per_step = schedule.source_images_per_step();
  const std::size_t steps = (data.source_images + source_per_step - 1) / source_per_step;
  if (steps < schedule.rebuilds_per_epoch()) {
    throw ConfigError("memory_update_fraction", "more memory updates per epoch than training steps");
  }
}

MetricsReport compute_metrics(const MemoryBank& bank, std::span<const StepLog> logs) {
  MetricsReport r;
  double match_sum = 0.0;
  double sim_sum = 0.0;
  double sim_min = std::numeric_limits<double>::infinity();
  std::size_t misses_after = 0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    if (!log.adapted) continue;
    if (log.has_match_rate) {
      match_sum += log.minibatch_match_rate;
      ++r.logged_batches;
    }
    r.filtered_targets += log.filtered_targets;
    r.memory_misses += log.memory_misses;
    if (log.alignment_skipped) ++r.skipped_alignment_steps;
    if (log.bank_fully_populated && !r.first_populated_step) r.first_populated_step = i;
    if (r.first_populated_step) {
      r.filtered_targets_after_populated += log.filtered_targets;
      misses_after += log.memory_misses;
    }
    sim_sum += log.similarity_sum;
    r.aligned_pairs += log.similarity_count;
    sim_min = std::min(sim_min, log.similarity_min);
  }
  if (r.logged_batches > 0) r.miss_rate_minibatch = 1.0 - match_sum / static_cast<double>(r.logged_batches);
  if (r.filtered_targets > 0) {
    r.miss_rate_memory = static_cast<double>(r.memory_misses) / static_cast<double>(r.filtered_targets);
  }
  if (r.filtered_targets_after_populated > 0) {
    r.miss_rate_memory_after_populated =
        static_cast<double>(misses_after) / static_cast<double>(r.filtered_targets_after_populated);
  }
  if (r.aligned_pairs > 0) {
    r.mean_pair_similarity = sim_sum / static_cast<double>(r.aligned_pairs);
    r.min_pair_similarity = sim_min;
  }

  r.intra_class_variance_proxy = intra_class_spread(bank);
  r.memory_capacities = bank.capacities();
  r.memory_counts.resize(bank.categories());
  for (std::size_t c = 0; c < bank.categories(); ++c) r.memory_counts[c] = bank.size(static_cast<int>(c));
  r.min_memory_count = *std::min_element(r.memory_counts.begin(), r.memory_counts.end());
  r.memory_generation = bank.generation();
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto& sched = config.schedule;
  const auto& wp = config.world;

  const SyntheticWorld world = make_world(wp, config.seed);
  const auto source_train = generate_batch(world, Domain::Source, config.data.source_images,
                                           config.data.min_instances, config.data.max_instances, 1);
  const auto target_train = generate_batch(world, Domain::Target, config.data.target_images,
                                           config.data.min_instances, config.data.max_instances, 2);
  const auto target_test = generate_balanced_set(world, Domain::Target, config.data.test_per_category, 3);

  const auto counts = category_counts(source_train, wp.categories);
  auto capacities = compute_capacities(sched.storage, counts);

  ToyModel model = ToyModel::init(wp.input_dim, wp.feature_dim, wp.categories, config.seed);
  MomentumSgd optimizer(model, sched.learning_rate, sched.momentum);
  MemoryStore store(MemoryBank(wp.categories, wp.feature_dim, sched.storage, std::move(capacities), 0));
  ThresholdTable thresholds{std::vector<double>(wp.categories, sched.base_delta), sched.base_delta, false};

  Rng data_rng = named_rng(config.seed, 0x64617461);
  Rng retrieval_rng = named_rng(config.seed, 0x72657472);

  const std::size_t src_per_step = sched.source_images_per_step();
  const std::size_t tgt_per_step = sched.target_images_per_step();
  const std::size_t steps_per_epoch = (source_train.size() + src_per_step - 1) / src_per_step;
  const std::size_t rebuilds = sched.rebuilds_per_epoch();
  std::set<std::size_t> rebuild_steps;
  for (std::size_t j = 0; j < rebuilds; ++j) rebuild_steps.insert(j * steps_per_epoch / rebuilds);

  MetricsReport report;
  report.initial_target_accuracy = evaluate_accuracy(model, target_test).macro;
  report.steps_per_epoch = steps_per_epoch;
  report.rebuilds_per_epoch = rebuilds;

  std::vector<StepLog> logs;
  std::vector<std::size_t> source_order(source_train.size());
  std::vector<std::size_t> target_order(target_train.size());
  std::iota(source_order.begin(), source_order.end(), std::size_t{0});
  std::iota(target_order.begin(), target_order.end(), std::size_t{0});
  std::size_t target_cursor = 0;
  std::size_t rebuild_count = 0;

  for (std::size_t epoch = 0; epoch < sched.epochs; ++epoch) {
    std::shuffle(source_order.begin(), source_order.end(), data_rng);
    const bool adapt = epoch >= sched.burn_in_epochs;
    EpochSummary summary;
    summary.epoch = epoch;
    summary.adapted = adapt;

    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      if (rebuild_steps.contains(step)) {
        auto rebuilt = rebuild_from_source(model, *store.current(), source_train);
        thresholds = compute_thresholds(rebuilt.per_category_accuracy, sched.base_delta);
        store.publish(std::move(rebuilt.bank));
        ++rebuild_count;
      }

      std::vector<SyntheticImage> source_batch;
      for (std::size_t i = step * src_per_step; i < std::min(source_train.size(), (step + 1) * src_per_step); ++i) {
        source_batch.push_back(source_train[source_order[i]]);
      }
      std::vector<SyntheticImage> target_batch;
      for (std::size_t i = 0; i < tgt_per_step; ++i) {
        if (target_cursor % target_train.size() == 0) {
          std::shuffle(target_order.begin(), target_order.end(), data_rng);
        }
        target_batch.push_back(target_train[target_order[target_cursor % target_train.size()]]);
        ++target_cursor;
      }

      const auto bank = store.current();
      auto result = train_step(model, optimizer, *bank, source_batch, target_batch, thresholds, sched,
                               adapt, retrieval_rng);
      add_breakdown(summary.mean_losses, result.breakdown);
      ++summary.steps;
      logs.push_back(result.log);
    }

    if (summary.steps > 0) {
      const double inv = 1.0 / static_cast<double>(summary.steps);
      summary.mean_losses.l_sup *= inv;
      summary.mean_losses.l_unsup *= inv;
      summary.mean_losses.l_dis *= inv;
      summary.mean_losses.l_ins *= inv;
      summary.mean_losses.total *= inv;
    }
    summary.target_accuracy = evaluate_accuracy(model, target_test).macro;
    report.epochs.push_back(summary);
  }

  const auto final_bank = store.current();
  MetricsReport metrics = compute_metrics(*final_bank, logs);
  metrics.initial_target_accuracy = report.initial_target_accuracy;
  metrics.steps_per_epoch = report.steps_per_epoch;
  metrics.rebuilds_per_epoch = report.rebuilds_per_epoch;
  metrics.rebuilds = rebuild_count;
  metrics.epochs = std::move(report.epochs);

  const auto test_acc = evaluate_accuracy(model, target_test);
  metrics.target_accuracy = test_acc.macro;
  metrics.target_accuracy_overall = test_acc.overall;
  metrics.target_accuracy_per_category = test_acc.per_category;
  metrics.source_accuracy = evaluate_accuracy(model, source_train).macro;
  return {std::move(metrics), *final_bank};
}

SweepParam sweep_param_from_string(const std::string& name) {
  if (name == "lambda3") return SweepParam::Lambda3;
  if (name == "K") return SweepParam::K;
  if (name == "gamma") return SweepParam::Gamma;
  if (name == "policy") return SweepParam::Policy;
  throw ConfigError("param", "unknown sweep parameter '" + name + "' (expected lambda3, K, gamma or policy)");
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Lambda3:
      return "lambda3";
    case SweepParam::K:
      return "K";
    case SweepParam::Gamma:
      return "gamma";
    case SweepParam::Policy:
      return "policy";
  }
  return "unknown";
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepParam param, const std::string& value) {
  ExperimentConfig out = config;
  const auto parse_double = [&](const char* key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) throw ConfigError(key, "'" + value + "' is not a number");
    return v;
  };
  switch (param) {
    case SweepParam::Lambda3:
      out.schedule.weights.lambda3 = parse_double("lambda3");
      break;
    case SweepParam::K: {
      const double k = parse_double("K");
      if (!(k >= 1.0) || k != std::floor(k)) throw ConfigError("K", "'" + value + "' is not a positive integer");
      out.schedule.top_k = static_cast<std::size_t>(k);
      break;
    }
    case SweepParam::Gamma:
      out.schedule.storage.gamma = parse_double("gamma");
      break;
    case SweepParam::Policy:
      out.schedule.storage.variant = storage_variant_from_string(value);
      break;
  }
  out.validate();
  return out;
}

double SweepRow::mean_target_accuracy() const {
  return mean_of(runs, [](const MetricsReport& r) { return r.target_accuracy; });
}

double SweepRow::std_target_accuracy() const {
  if (runs.size() < 2) return 0.0;
  const double mean = mean_target_accuracy();
  double ss = 0.0;
  for (const auto& r : runs) ss += (r.target_accuracy - mean) * (r.target_accuracy - mean);
  return std::sqrt(ss / static_cast<double>(runs.size() - 1));
}

double SweepRow::mean_miss_rate_minibatch() const {
  return mean_of(runs, [](const MetricsReport& r) { return r.miss_rate_minibatch; });
}

double SweepRow::mean_miss_rate_memory() const {
  return mean_of(runs, [](const MetricsReport& r) { return r.miss_rate_memory; });
}

double SweepRow::mean_pair_similarity() const {
  return mean_of(runs, [](const MetricsReport& r) { return r.mean_pair_similarity; });
}

double SweepRow::mean_memory_size() const {
  return mean_of(runs, [](const MetricsReport& r) {
    return std::accumulate(r.memory_counts.begin(), r.memory_counts.end(), std::size_t{0});
  });
}

SweepTable sweep(const ExperimentConfig& config, SweepParam param, std::span<const std::string> values,
                 std::size_t jobs) {
  if (values.empty()) throw ConfigError("values", "sweep needs at least one value");
  SweepTable table;
  table.param = param;

  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    configs.push_back(apply_sweep_value(config, param, v));
    SweepRow row;
    row.value = v;
    for (std::size_t s = 0; s < config.num_seeds; ++s) row.seeds.push_back(config.seed + s);
    row.runs.resize(config.num_seeds);
    table.rows.push_back(std::move(row));
  }

  const std::size_t tasks = values.size() * config.num_seeds;
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks);
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t v = t / config.num_seeds;
      const std::size_t s = t % config.num_seeds;
      try {
        ExperimentConfig run_config = configs[v];
        run_config.seed = table.rows[v].seeds[s];
        table.rows[v].runs[s] = run_experiment(run_config).report;
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, tasks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return table;
}

}  // namespace memalign

#include "tsketch/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tsketch/error.hpp"
#include "tsketch/io.hpp"
#include "tsketch/random.hpp"
#include "tsketch/recovery.hpp"

namespace tsketch {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<Family> broadcast(const std::vector<Family>& families, Index d, const char* role) {
  if (families.size() == 1) return std::vector<Family>(d, families.front());
  require(families.size() == d, ErrorCategory::config,
          std::string(role) + " families need one entry or one per mode");
  return families;
}

template <typename E, typename Parse>
E parse_enum(const json& value, Parse parse, const char* what) {
  require(value.is_string(), ErrorCategory::config, std::string(what) + " must be a string");
  const auto parsed = parse(value.get<std::string>());
  require(parsed.has_value(), ErrorCategory::config,
          std::string("unknown ") + what + " '" + value.get<std::string>() + "'");
  return *parsed;
}

std::vector<Family> parse_families(const json& value) {
  std::vector<Family> out;
  if (value.is_array()) {
    for (const auto& v : value) out.push_back(parse_enum<Family>(v, parse_family, "family"));
  } else {
    out.push_back(parse_enum<Family>(value, parse_family, "family"));
  }
  return out;
}

json families_json(const std::vector<Family>& families) {
  if (families.size() == 1) return std::string(to_string(families.front()));
  json arr = json::array();
  for (Family f : families) arr.push_back(std::string(to_string(f)));
  return arr;
}

}  // namespace

TrialData make_data(const ExperimentConfig& config, Index trial) {
  TrialData data;
  const std::uint64_t seed = config.data_seed(trial);
  switch (config.generator) {
    case Generator::lowrank: {
      auto inst = gen_lowrank(config.n, config.d, config.r_true, seed);
      data.clean = std::move(inst.tensor);
      data.truth = std::move(inst.factors);
      break;
    }
    case Generator::superdiag_exp:
      data.clean = gen_superdiag_exp(config.n, config.d, config.r_true);
      break;
    case Generator::superdiag_poly:
      data.clean = gen_superdiag_poly(config.n, config.d, config.r_true);
      break;
    case Generator::file:
      if (!config.clean_path.empty()) {
        data.observed = io::load_tensor(config.input_path);
        data.clean = io::load_tensor(config.clean_path);
        require(data.observed.shape() == data.clean.shape(), ErrorCategory::shape,
                "clean and observed tensors differ in shape");
        return data;
      }
      data.clean = io::load_tensor(config.input_path);
      break;
  }
  data.observed = config.snr_db ? add_noise_snr(data.clean, *config.snr_db, seed) : data.clean;
  return data;
}

std::string_view to_string(Generator g) noexcept {
  switch (g) {
    case Generator::lowrank: return "lowrank";
    case Generator::superdiag_exp: return "superdiag_exp";
    case Generator::superdiag_poly: return "superdiag_poly";
    case Generator::file: return "file";
  }
  return "unknown";
}

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::one_pass: return "onepass";
    case Variant::two_pass: return "twopass";
    case Variant::recycled: return "recycled";
  }
  return "unknown";
}

std::optional<Generator> parse_generator(std::string_view name) noexcept {
  for (Generator g : {Generator::lowrank, Generator::superdiag_exp, Generator::superdiag_poly,
                      Generator::file})
    if (name == to_string(g)) return g;
  return std::nullopt;
}

std::optional<Variant> parse_variant(std::string_view name) noexcept {
  for (Variant v : {Variant::one_pass, Variant::two_pass, Variant::recycled})
    if (name == to_string(v)) return v;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  require(d >= 2, ErrorCategory::config, "d must be at least 2");
  require(n >= 1, ErrorCategory::config, "n must be positive");
  require(r_fit >= 1 && r_true >= 1, ErrorCategory::config, "ranks must be positive");
  require(!m.empty() && !m_c.empty(), ErrorCategory::config, "sweep lists must be non-empty");
  require(pairing == Pairing::grid || m.size() == m_c.size(), ErrorCategory::config,
          "zip pairing needs m and m_c lists of equal length");
  require(trials >= 1, ErrorCategory::config, "trials must be at least 1");
  require(threads >= 1, ErrorCategory::config, "threads must be at least 1");
  require(!variants.empty(), ErrorCategory::config, "no recovery variants selected");
  require(bound_eps > 0.0 && bound_eps < 1.0, ErrorCategory::config, "bound_eps must lie in (0, 1)");
  require(generator != Generator::file || !input_path.empty(), ErrorCategory::config,
          "the file generator needs input_path");
  broadcast(loo_families, d, "loo");
  broadcast(core_families, d, "core");
  if (std::find(variants.begin(), variants.end(), Variant::recycled) != variants.end())
    require(loo_kind == LooKind::kronecker, ErrorCategory::config,
            "the recycled variant needs kronecker sketches");
}

std::vector<std::pair<Index, Index>> ExperimentConfig::budget_pairs() const {
  std::vector<std::pair<Index, Index>> pairs;
  if (pairing == Pairing::zip) {
    for (Index k = 0; k < m.size(); ++k) pairs.emplace_back(m[k], m_c[k]);
  } else {
    for (Index a : m)
      for (Index b : m_c) pairs.emplace_back(a, b);
  }
  return pairs;
}

std::uint64_t ExperimentConfig::data_seed(Index trial) const {
  return derive_seed(seed, "data", trial);
}

std::uint64_t ExperimentConfig::plan_seed(Index trial, Index m_, Index m_c_) const {
  return derive_seed(derive_seed(seed, "plan", trial), "budget", m_, m_c_);
}

SketchPlan ExperimentConfig::plan_for(const Shape& shape, Index trial, Index m_,
                                      Index m_c_) const {
  SketchPlan plan;
  plan.shape = shape;
  plan.loo_kind = loo_kind;
  plan.m = m_;
  plan.m_c = m_c_;
  plan.loo_families = broadcast(loo_families, shape.size(), "loo");
  plan.diag_family = diag_family;
  plan.core_families = broadcast(core_families, shape.size(), "core");
  plan.seed = plan_seed(trial, m_, m_c_);
  return plan;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["generator"] = std::string(to_string(c.generator));
  j["input_path"] = c.input_path;
  j["clean_path"] = c.clean_path;
  j["n"] = c.n;
  j["d"] = c.d;
  j["r_true"] = c.r_true;
  j["r_fit"] = c.r_fit;
  j["snr_db"] = c.snr_db ? json(*c.snr_db) : json(nullptr);
  j["loo_kind"] = std::string(to_string(c.loo_kind));
  j["families"] = {{"loo", families_json(c.loo_families)},
                   {"diag", std::string(to_string(c.diag_family))},
                   {"core", families_json(c.core_families)}};
  j["m"] = c.m;
  j["m_c"] = c.m_c;
  j["pairing"] = c.pairing == Pairing::zip ? "zip" : "grid";
  json variants = json::array();
  for (Variant v : c.variants) variants.push_back(std::string(to_string(v)));
  j["variants"] = variants;
  j["bound_eps"] = c.bound_eps;
  j["compute_tails"] = c.compute_tails;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["threads"] = c.threads;
  return j.dump(2);
}

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCategory::config, "config must be a JSON object");
  static const std::vector<std::string> known{
      "generator", "input_path", "clean_path", "n", "d", "r_true", "r_fit", "snr_db",
      "loo_kind", "families", "m", "m_c", "pairing", "variants", "bound_eps",
      "compute_tails", "trials", "seed", "output", "threads"};
  for (const auto& [key, value] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(), ErrorCategory::config,
            "unknown config key '" + key + "'");

  ExperimentConfig c;
  try {
    if (j.contains("generator")) c.generator = parse_enum<Generator>(j["generator"], parse_generator, "generator");
    if (j.contains("input_path")) c.input_path = j["input_path"].get<std::string>();
    if (j.contains("clean_path")) c.clean_path = j["clean_path"].get<std::string>();
    if (j.contains("n")) c.n = j["n"].get<Index>();
    if (j.contains("d")) c.d = j["d"].get<Index>();
    if (j.contains("r_true")) c.r_true = j["r_true"].get<Index>();
    c.r_fit = j.contains("r_fit") ? j["r_fit"].get<Index>() : c.r_true;
    if (j.contains("snr_db") && !j["snr_db"].is_null()) c.snr_db = j["snr_db"].get<double>();
    if (j.contains("loo_kind")) c.loo_kind = parse_enum<LooKind>(j["loo_kind"], parse_loo_kind, "loo_kind");
    if (j.contains("families")) {
      const auto& f = j["families"];
      require(f.is_object(), ErrorCategory::config, "families must be an object");
      if (f.contains("loo")) c.loo_families = parse_families(f["loo"]);
      if (f.contains("diag")) c.diag_family = parse_enum<Family>(f["diag"], parse_family, "family");
      if (f.contains("core")) c.core_families = parse_families(f["core"]);
    }
    if (j.contains("m")) c.m = j["m"].get<std::vector<Index>>();
    if (j.contains("m_c")) c.m_c = j["m_c"].get<std::vector<Index>>();
    if (j.contains("pairing")) {
      const auto p = j["pairing"].get<std::string>();
      require(p == "grid" || p == "zip", ErrorCategory::config, "pairing must be grid or zip");
      c.pairing = p == "zip" ? Pairing::zip : Pairing::grid;
    }
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j["variants"]) c.variants.push_back(parse_enum<Variant>(v, parse_variant, "variant"));
    }
    if (j.contains("bound_eps")) c.bound_eps = j["bound_eps"].get<double>();
    if (j.contains("compute_tails")) c.compute_tails = j["compute_tails"].get<bool>();
    if (j.contains("trials")) c.trials = j["trials"].get<Index>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("threads")) c.threads = j["threads"].get<Index>();
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

std::vector<ResultRow> run_trial(const ExperimentConfig& config, Index trial) {
  config.validate();
  const TrialData data = make_data(config, trial);
  const DenseTensor& x = data.observed;
  const Index r = config.r_fit;

  double tail_sum = kNaN, bound = kNaN;
  if (config.compute_tails) {
    const auto deltas = tail_energies(x, r);
    tail_sum = 0.0;
    for (double delta : deltas) tail_sum += delta;
    bound = bound_rhs(config.bound_eps, deltas);
  }
  const double observed_snr = snr_db(x, data.clean);
  const double clean_norm = norm(data.clean);

  std::vector<ResultRow> rows;
  for (const auto& [m, m_c] : config.budget_pairs()) {
    const SketchPlan plan = config.plan_for(x.shape(), trial, m, m_c);

    auto start = Clock::now();
    const SketchBundle bundle = sketch(x, plan);
    const double t_sketch = seconds_since(start);

    start = Clock::now();
    const auto factors = recover_factors(bundle, r);
    const double t_factor = seconds_since(start);

    double angle = kNaN;
    if (!data.truth.empty() && config.r_fit == config.r_true) {
      angle = 0.0;
      for (Index i = 0; i < factors.size(); ++i)
        angle = std::max(angle, max_principal_angle(factors[i], data.truth[i]));
    }

    for (Variant variant : config.variants) {
      start = Clock::now();
      TuckerFactorization tucker{{}, factors};
      switch (variant) {
        case Variant::one_pass: {
          std::vector<Matrix> phi;
          for (Index i = 0; i < plan.order(); ++i) phi.push_back(materialize(plan.core_spec(i)));
          tucker.core = recover_core_onepass(bundle.core, phi, factors);
          break;
        }
        case Variant::two_pass:
          tucker.core = compute_core_twopass(x, factors);
          break;
        case Variant::recycled: {
          std::vector<Matrix> omega;
          for (Index i = 0; i < plan.order(); ++i) {
            const auto spec = plan.loo_spec(0, i);
            omega.push_back(spec.family == Family::identity ? Matrix{} : materialize(spec));
          }
          tucker.core = recover_core_recycled(bundle.loo_tensor(0), omega, factors);
          break;
        }
      }
      const double t_core = seconds_since(start);
      const DenseTensor estimate = reconstruct(tucker);
      const double abs_error = norm(estimate - x);

      ResultRow row;
      row.trial = trial;
      row.m = m;
      row.m_c = m_c;
      row.variant = variant;
      row.abs_error = abs_error;
      row.relative_error = abs_error / clean_norm;
      row.snr_db = observed_snr;
      row.max_angle_deg = angle;
      row.tail_sum = tail_sum;
      row.bound_rhs = bound;
      row.storage_entries = bundle.entry_count();
      row.t_sketch = t_sketch;
      row.t_factor = t_factor;
      row.t_core = t_core;
      row.data_seed = config.data_seed(trial);
      row.plan_seed = plan.seed;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::vector<ResultRow>> per_trial(config.trials);
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (Index t = next++; t < config.trials; t = next++) {
      try {
        per_trial[t] = run_trial(config, t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.trials;
      }
    }
  };
  const Index workers = std::min(config.threads, config.trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (Index w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<ResultRow> rows;
  for (auto& batch : per_trial) rows.insert(rows.end(), batch.begin(), batch.end());
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.trial, a.m, a.m_c, a.variant) < std::tie(b.trial, b.m, b.m_c, b.variant);
  });
  return rows;
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "# " << kCsvVersion << '\n';
  out << "trial,m,m_c,variant,relative_error,abs_error,snr_db,max_angle_deg,tail_sum,bound_rhs,"
         "storage_entries,t_sketch,t_factor,t_core,data_seed,plan_seed\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.trial << ',' << r.m << ',' << r.m_c << ',' << to_string(r.variant) << ','
        << r.relative_error << ',' << r.abs_error << ',' << r.snr_db << ',' << r.max_angle_deg
        << ',' << r.tail_sum << ',' << r.bound_rhs << ',' << r.storage_entries << ','
        << r.t_sketch << ',' << r.t_factor << ',' << r.t_core << ',' << r.data_seed << ','
        << r.plan_seed << '\n';
  }
}

}  // namespace tsketch

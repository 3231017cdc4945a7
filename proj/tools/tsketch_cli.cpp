// tsketch command-line tool: gen, sketch, recover, eval, experiment.
//
// Failures print one JSON object {"error": <category>, "message": ...} on
// stderr and exit with the category's code (see exit_code below).

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsketch/error.hpp"
#include "tsketch/eval.hpp"
#include "tsketch/experiment.hpp"
#include "tsketch/io.hpp"
#include "tsketch/recovery.hpp"
#include "tsketch/sketch.hpp"

using namespace tsketch;
using json = nlohmann::json;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return 2;
    case ErrorCategory::shape: return 3;
    case ErrorCategory::rank: return 4;
    case ErrorCategory::singular: return 5;
    case ErrorCategory::config: return 6;
  }
  return 1;
}

int report_error(ErrorCategory c, const std::string& message) {
  std::cerr << json{{"error", std::string(to_string(c))}, {"message", message}}.dump() << '\n';
  return exit_code(c);
}

struct Options {
  std::string config_path;
  std::string input;
  std::string output;
  std::string tensor;
  std::string clean;
  std::optional<std::uint64_t> seed;
  std::optional<Index> threads;
  std::optional<Index> m;
  std::optional<Index> m_c;
  Index rank = 0;
  Index slabs = 0;
  bool two_pass = false;
  bool chunks = false;
  bool print_config = false;
};

ExperimentConfig effective_config(const Options& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.m) c.m = {*o.m};
  if (o.m_c) c.m_c = {*o.m_c};
  c.validate();
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  require(out.good(), ErrorCategory::io, "cannot open " + path + " for writing");
  out << text;
  require(out.good(), ErrorCategory::io, "write to " + path + " failed");
}

void cmd_gen(const Options& o) {
  const ExperimentConfig c = effective_config(o);
  require(!o.output.empty(), ErrorCategory::config, "gen needs --output");
  const TrialData data = make_data(c, 0);
  if (o.slabs > 0)
    io::save_chunk_stream(o.output, data.observed, o.slabs);
  else
    io::save_tensor(o.output, data.observed);
  if (!o.clean.empty()) io::save_tensor(o.clean, data.clean);
}

void cmd_sketch(const Options& o) {
  const ExperimentConfig c = effective_config(o);
  require(!o.input.empty() && !o.output.empty(), ErrorCategory::config,
          "sketch needs --input and --output");
  SketchBundle bundle;
  if (o.chunks) {
    io::ChunkStreamReader reader(o.input);
    SketchAccumulator acc(c.plan_for(reader.shape(), 0, c.m.front(), c.m_c.front()));
    SlabChunk chunk;
    while (reader.next(chunk)) acc.update(std::move(chunk));
    bundle = acc.finalize();
  } else {
    const DenseTensor x = io::load_tensor(o.input);
    bundle = sketch(x, c.plan_for(x.shape(), 0, c.m.front(), c.m_c.front()));
  }
  io::save_bundle(o.output, bundle);
}

void cmd_recover(const Options& o) {
  require(!o.input.empty() && !o.output.empty(), ErrorCategory::config,
          "recover needs --input and --output");
  require(o.rank >= 1, ErrorCategory::config, "recover needs --rank");
  require(!o.two_pass || !o.tensor.empty(), ErrorCategory::config,
          "--two-pass needs --tensor for the second pass");
  const SketchBundle bundle = io::load_bundle(o.input);
  // The tensor file is opened only on the two-pass path.
  const TuckerFactorization t =
      o.two_pass ? two_pass(bundle, io::load_tensor(o.tensor), o.rank) : one_pass(bundle, o.rank);
  io::save_tucker(o.output, t);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void cmd_eval(const Options& o) {
  require(!o.input.empty() && !o.tensor.empty(), ErrorCategory::config,
          "eval needs --input (factorization) and --tensor");
  const TuckerFactorization t = io::load_tucker(o.input);
  const DenseTensor x = io::load_tensor(o.tensor);
  const DenseTensor x0 = o.clean.empty() ? x : io::load_tensor(o.clean);
  require(x.shape() == x0.shape(), ErrorCategory::shape, "clean and observed tensors differ in shape");
  const DenseTensor x_hat = reconstruct(t);
  require(x_hat.shape() == x.shape(), ErrorCategory::shape,
          "factorization does not match the tensor shape");
  json report;
  report["relative_error"] = relative_error(x_hat, x, x0);
  report["abs_error"] = norm(x - x_hat);
  report["snr_db"] = finite_or_null(snr_db(x, x0));
  report["rank"] = t.rank();
  report["shape"] = x.shape();
  const auto deltas = tail_energies(x, t.rank());
  report["tail_energies"] = deltas;
  double sum = 0.0;
  for (double d : deltas) sum += d;
  report["tail_sum"] = sum;
  write_text(o.output, report.dump(2) + "\n");
}

void cmd_experiment(const Options& o) {
  ExperimentConfig c = effective_config(o);
  if (!o.output.empty()) c.output = o.output;
  const auto rows = run_experiment(c);
  if (c.output == "-") {
    write_csv(std::cout, rows);
    return;
  }
  std::ofstream out(c.output);
  require(out.good(), ErrorCategory::io, "cannot open " + c.output + " for writing");
  write_csv(out, rows);
  require(out.good(), ErrorCategory::io, "write to " + c.output + " failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tucker sketching: one-pass streaming sketches and recovery"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON experiment config");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_flag("--print-config", o.print_config, "print the effective config and exit");
  };
  auto add_budget = [&](CLI::App* sub) {
    sub->add_option("--m", o.m, "leave-one-out sketch size");
    sub->add_option("--mc", o.m_c, "core sketch size");
  };

  auto* gen = app.add_subcommand("gen", "generate a test tensor");
  add_config(gen);
  gen->add_option("--output", o.output, "tensor file");
  gen->add_option("--clean", o.clean, "also write the noiseless tensor here");
  gen->add_option("--slabs", o.slabs, "write a chunk stream with this many slabs");

  auto* sk = app.add_subcommand("sketch", "sketch a tensor file or chunk stream");
  add_config(sk);
  add_budget(sk);
  sk->add_option("--input", o.input, "tensor file, or chunk stream with --chunks");
  sk->add_option("--output", o.output, "bundle file");
  sk->add_flag("--chunks", o.chunks, "read a chunk stream");

  auto* rec = app.add_subcommand("recover", "recover a Tucker factorization from a bundle");
  rec->add_option("--input", o.input, "bundle file");
  rec->add_option("--output", o.output, "factorization file");
  rec->add_option("--rank", o.rank, "target rank");
  rec->add_flag("--two-pass", o.two_pass, "recompute the core from the tensor");
  rec->add_option("--tensor", o.tensor, "tensor file for --two-pass");

  auto* ev = app.add_subcommand("eval", "compare a factorization with a tensor");
  ev->add_option("--input", o.input, "factorization file");
  ev->add_option("--tensor", o.tensor, "observed tensor");
  ev->add_option("--clean", o.clean, "clean tensor (defaults to the observed one)");
  ev->add_option("--output", o.output, "JSON report (stdout if omitted)");

  auto* ex = app.add_subcommand("experiment", "run a parameter sweep and write CSV");
  add_config(ex);
  add_budget(ex);
  ex->add_option("--output", o.output, "CSV path, '-' for stdout");
  ex->add_option("--threads", o.threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(ErrorCategory::config, e.what());
  }

  try {
    if (o.print_config) {
      std::cout << config_to_json(effective_config(o)) << '\n';
      return 0;
    }
    if (gen->parsed()) cmd_gen(o);
    else if (sk->parsed()) cmd_sketch(o);
    else if (rec->parsed()) cmd_recover(o);
    else if (ev->parsed()) cmd_eval(o);
    else if (ex->parsed()) cmd_experiment(o);
  } catch (const Error& e) {
    return report_error(e.category(), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCategory::io, e.what());
  }
  return 0;
}

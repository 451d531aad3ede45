// vulnaug command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vulnaug/vulnaug.hpp"

namespace fs = std::filesystem;
using namespace vulnaug;

namespace {

struct AugmentArgs {
  std::string input;
  std::string method;
  bool conditioned = false;
  std::uint64_t rate = 23;
  std::uint64_t seed = 0;
  std::optional<double> alpha_lo, alpha_hi;
  double p = 0.1;
  double swap_frac = 0.25;
  double sigma = 0.1;
  bool scalar_alpha = false;
  bool gs_literal = false;
  bool strict = false;
  std::string eligibility;
  std::string to_ratio;
  std::string out;
};

Eligibility parse_eligibility(const std::string& s, Eligibility fallback) {
  if (s.empty()) return fallback;
  if (s == "annotated") return Eligibility::flaw_annotated_only;
  if (s == "all") return Eligibility::all_vulnerable;
  throw_usage("eligibility must be 'annotated' or 'all'");
}

PipelinePlan make_plan(const AugmentArgs& a, Eligibility default_eligibility) {
  PipelinePlan plan;
  plan.augment = AugmentConfig::for_method(parse_method(a.method), a.seed);
  if (a.alpha_lo) plan.augment.a_lo = *a.alpha_lo;
  if (a.alpha_hi) plan.augment.a_hi = *a.alpha_hi;
  plan.augment.p = a.p;
  plan.augment.swap_fraction = a.swap_frac;
  plan.augment.sigma = a.sigma;
  plan.augment.conditioned = a.conditioned;
  plan.augment.scalar_alpha = a.scalar_alpha;
  plan.augment.gs_literal = a.gs_literal;
  plan.rate = a.rate;
  plan.strict = a.strict;
  plan.eligibility = parse_eligibility(a.eligibility, default_eligibility);
  if (!a.to_ratio.empty()) plan.to_ratio = parse_ratio(a.to_ratio);
  plan.source = a.input;
  plan.output = a.out;
  return plan;
}

void print_metrics_text(const MetricsReport& m) {
  std::cout << std::fixed << std::setprecision(2);
  std::cout << "Precision  " << std::setw(8) << m.precision * 100 << '\n'
            << "Recall     " << std::setw(8) << m.recall * 100 << '\n'
            << "F1         " << std::setw(8) << m.f1 * 100 << '\n'
            << "AUC        " << std::setw(8) << m.auc * 100 << '\n'
            << "TP " << m.tp << "  FP " << m.fp << "  TN " << m.tn << "  FN " << m.fn << "  (threshold "
            << std::setprecision(3) << m.threshold << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Representation-level augmentation for imbalanced vulnerability datasets"};
  app.require_subcommand(1);

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Print class-balance statistics of a dataset");
  std::string stats_dir;
  bool stats_json = false;
  stats_cmd->add_option("dataset", stats_dir, "Dataset directory")->required();
  stats_cmd->add_flag("--json", stats_json, "Emit JSON");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic planted-signal dataset");
  SynthSpec spec;
  std::string synth_out;
  synth_cmd->add_option("--vuln", spec.vulnerable, "Vulnerable samples")->capture_default_str();
  synth_cmd->add_option("--clean", spec.clean, "Clean samples")->capture_default_str();
  synth_cmd->add_option("--dim", spec.dim, "Embedding dimension d")->capture_default_str();
  synth_cmd->add_option("--block", spec.block_size, "Block size L")->capture_default_str();
  synth_cmd->add_option("--mu", spec.mu, "Signal shift")->capture_default_str();
  synth_cmd->add_option("--k", spec.signal_dims, "Shifted dimensions")->capture_default_str();
  synth_cmd->add_option("--span-min", spec.span_min, "Shortest flaw span")->capture_default_str();
  synth_cmd->add_option("--span-max", spec.span_max, "Longest flaw span")->capture_default_str();
  synth_cmd->add_option("--annotated-frac", spec.annotated_frac, "Share of vulnerable samples with spans")
      ->capture_default_str();
  synth_cmd->add_option("--min-tokens", spec.min_tokens, "Fewest tokens per sample (0: half the block)")
      ->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  // locate
  auto* locate_cmd = app.add_subcommand("locate", "Locate flaw lines and store their spans");
  std::string locate_dir, lines_file;
  locate_cmd->add_option("dataset", locate_dir, "Dataset directory (updated in place)")->required();
  locate_cmd->add_option("--lines", lines_file, "JSONL file of {id, line_token_ids}")->required();

  // augment
  auto* augment_cmd = app.add_subcommand("augment", "Generate vulnerable samples with an augmentation operator");
  AugmentArgs aug;
  augment_cmd->add_option("input", aug.input, "Source dataset")->required();
  augment_cmd->add_option("--method", aug.method, "Operator")
      ->required()
      ->check(CLI::IsMember({"li", "le", "sp", "bi", "gs"}));
  augment_cmd->add_flag("--conditioned", aug.conditioned, "Restore flaw-span rows after augmentation");
  augment_cmd->add_option("--rate", aug.rate, "Final multiple of each eligible sample")->capture_default_str();
  augment_cmd->add_option("--seed", aug.seed, "Seed")->capture_default_str();
  augment_cmd->add_option("--alpha-lo", aug.alpha_lo, "Lower bound of alpha (LI 0.9, LE 1.0)");
  augment_cmd->add_option("--alpha-hi", aug.alpha_hi, "Upper bound of alpha (LI 1.0, LE 1.1)");
  augment_cmd->add_option("--p", aug.p, "Drop probability for sp")->capture_default_str();
  augment_cmd->add_option("--swap-frac", aug.swap_frac, "Swap probability for bi")->capture_default_str();
  augment_cmd->add_option("--sigma", aug.sigma, "Standard deviation for gs")->capture_default_str();
  augment_cmd->add_flag("--scalar-alpha", aug.scalar_alpha, "One alpha per sample for li/le");
  augment_cmd->add_flag("--gs-literal", aug.gs_literal, "Gaussian scaling as h + beta*h");
  augment_cmd->add_flag("--strict", aug.strict, "Fail on vulnerable samples without spans in conditioned mode");
  augment_cmd->add_option("--eligibility", aug.eligibility, "annotated (default) or all")
      ->check(CLI::IsMember({"annotated", "all"}));
  augment_cmd->add_option("--out", aug.out, "Output directory")->required();

  // balance
  auto* balance_cmd = app.add_subcommand("balance", "Random oversampling of vulnerable samples");
  AugmentArgs bal;
  bal.method = "ros";
  balance_cmd->add_option("input", bal.input, "Source dataset")->required();
  balance_cmd->add_option("--method", bal.method, "Balancing method")->check(CLI::IsMember({"ros"}));
  balance_cmd->add_option("--to-ratio", bal.to_ratio, "Target vulnerable:clean ratio, e.g. 1:1");
  balance_cmd->add_option("--rate", bal.rate, "Final multiple of each eligible sample (without --to-ratio)")
      ->capture_default_str();
  balance_cmd->add_option("--seed", bal.seed, "Seed")->capture_default_str();
  balance_cmd->add_option("--eligibility", bal.eligibility, "all (default) or annotated")
      ->check(CLI::IsMember({"annotated", "all"}));
  balance_cmd->add_option("--out", bal.out, "Output directory")->required();

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "Train and evaluate the linear probe");
  std::string train_dir, test_dir, valid_dir;
  ProbeConfig probe_cfg;
  bool probe_json = false;
  probe_cmd->add_option("--train", train_dir, "Training dataset")->required();
  probe_cmd->add_option("--test", test_dir, "Test dataset")->required();
  probe_cmd->add_option("--valid", valid_dir, "Validation dataset (best-F1 epoch selection)");
  probe_cmd->add_option("--epochs", probe_cfg.epochs, "Epochs")->capture_default_str();
  probe_cmd->add_option("--lr", probe_cfg.learning_rate, "Learning rate")->capture_default_str();
  probe_cmd->add_option("--batch", probe_cfg.batch_size, "Batch size")->capture_default_str();
  probe_cmd->add_option("--threshold", probe_cfg.threshold, "Decision threshold")->capture_default_str();
  probe_cmd->add_option("--seed", probe_cfg.seed, "Seed")->capture_default_str();
  probe_cmd->add_flag("--json", probe_json, "Emit JSON");

  // repro
  auto* repro_cmd = app.add_subcommand("repro", "Run the strategy comparison matrix");
  std::string repro_config, repro_out = ".";
  repro_cmd->add_option("config", repro_config, "JSON config file")->required();
  repro_cmd->add_option("--out", repro_out, "Directory for report.json")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*stats_cmd) {
      const DatasetReader reader(stats_dir);
      const auto st = dataset_stats(reader);
      if (stats_json) {
        std::cout << st.to_json().dump(2) << '\n';
      } else {
        std::cout << st.to_text();
      }
    } else if (*synth_cmd) {
      const auto m = generate(spec, synth_out);
      std::cout << manifest_to_json(m).dump(2) << '\n';
    } else if (*locate_cmd) {
      const auto report = annotate_dataset(locate_dir, read_flaw_lines(lines_file));
      std::cout << report.to_json().dump(2) << '\n';
    } else if (*augment_cmd) {
      const auto plan = make_plan(aug, Eligibility::flaw_annotated_only);
      std::cout << balance(plan).to_json(plan).dump(2) << '\n';
    } else if (*balance_cmd) {
      const auto plan = make_plan(bal, Eligibility::all_vulnerable);
      std::cout << random_oversampling(plan).to_json(plan).dump(2) << '\n';
    } else if (*probe_cmd) {
      const DatasetReader train(train_dir);
      const DatasetReader test(test_dir);
      std::optional<DatasetReader> valid;
      if (!valid_dir.empty()) valid.emplace(valid_dir);
      const auto model = train_probe(train, probe_cfg, valid ? &*valid : nullptr);
      const auto metrics = evaluate(model, test, probe_cfg);
      if (probe_json) {
        std::cout << metrics.to_json().dump(2) << '\n';
      } else {
        print_metrics_text(metrics);
      }
    } else if (*repro_cmd) {
      const auto cfg = ReproConfig::load(repro_config);
      const fs::path out = repro_out;
      fs::create_directories(out);
      const fs::path work = cfg.work_dir.empty() ? out / ".work" : cfg.work_dir;
      const auto report = run_repro(cfg, work);
      fs::remove_all(work);
      std::ofstream(out / "report.json") << report.to_json().dump(2) << '\n';
      std::cout << report.to_text();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::internal);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::internal);
  }
  return 0;
}

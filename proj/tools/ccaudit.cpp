// Command-line entry point: sample | train-lm | classify-train | audit | report.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include "ccaudit/audit.hpp"
#include "ccaudit/classifier.hpp"
#include "ccaudit/error.hpp"
#include "ccaudit/ngram_lm.hpp"
#include "ccaudit/report.hpp"
#include "ccaudit/wet.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace ccaudit;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

audit::NamedPath parse_named(const std::string& spec, const char* flag) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
        throw UsageError(std::string(flag) + " expects name=FILE, got '" + spec + "'");
    }
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

void print_resolved(const CLI::App& sub) {
    std::cerr << "# ccaudit " << sub.get_name() << " resolved config\n[" << sub.get_name() << "]\n"
              << sub.config_to_str(true, false);
}

struct SampleArgs {
    std::string manifest;
    double rate = 0.0;
    std::uint64_t seed = 0;
};

struct TrainLmArgs {
    std::string corpus;
    std::size_t order = 3;
    std::size_t min_count = 2;
    std::string out;
};

struct ClassifyArgs {
    std::string data;
    double l2 = 1e-4;
    std::size_t epochs = 200;
    double lr = 1.0;
    std::size_t min_df = 1;
    std::size_t ngram_max = 3;
    std::uint64_t seed = 0;
    std::string out;
};

struct AuditArgs {
    std::vector<std::string> shards;
    std::string manifest;
    double rate = -1.0;
    std::int64_t seed = -1;
    std::string lang = "en";
    std::int64_t max_distance = -1;
    std::string profiles;
    std::vector<std::string> lexicons;
    std::string classifier;
    std::string lm;
    std::vector<std::string> ext;
    bool distinct = false;
    bool strict = false;
    std::size_t workers = 0;
    std::string out;
};

struct ReportArgs {
    std::string audit;
    std::vector<std::uint64_t> thresholds{1, 3, 10};
    double classifier_threshold = 0.5;
    double ext_threshold = 0.5;
    std::string out;
    std::string csv_dir;
};

int run_sample(const SampleArgs& a) {
    const auto manifest = wet::load_manifest(a.manifest);
    const auto picked = wet::sample_shards(manifest, a.rate, a.seed);
    for (const auto& id : picked.shard_ids) std::cout << id << '\n';
    std::cerr << "selected " << picked.shard_ids.size() << " of " << manifest.shard_ids.size() << " shards\n";
    return 0;
}

int run_train_lm(const TrainLmArgs& a) {
    const auto corpus = lm::load_corpus_dir(a.corpus);
    const auto model = lm::NGramModel::train(corpus, a.order, a.min_count);
    model.save(a.out);
    std::cerr << "trained order-" << model.order() << " model on " << corpus.size() << " sentences, vocab "
              << model.vocab_size() << " -> " << a.out << '\n';
    return 0;
}

int run_classify_train(const ClassifyArgs& a) {
    const auto data = classifier::load_training_data(a.data);
    classifier::TrainOptions options{a.l2, a.epochs, a.lr, a.seed};
    const auto model = classifier::fit_classifier(data, {1, a.ngram_max}, a.min_df, options);
    classifier::save_classifier(model, a.out);
    std::cerr << "trained " << classifier::kModelLabel << " on " << data.size() << " examples, vocabulary "
              << model.vectorizer.size() << " -> " << a.out << '\n';
    return 0;
}

audit::AuditConfig to_config(const AuditArgs& a) {
    audit::AuditConfig c;
    c.shards = a.shards;
    if (!a.manifest.empty()) c.manifest = a.manifest;
    if (a.rate >= 0.0) c.rate = a.rate;
    if (a.seed >= 0) c.seed = static_cast<std::uint64_t>(a.seed);
    c.target_lang = a.lang;
    c.max_distance = a.max_distance < 0 ? langid::kNoDistanceLimit : static_cast<std::uint64_t>(a.max_distance);
    c.profiles_dir = a.profiles;
    for (const auto& l : a.lexicons) c.lexicons.push_back(parse_named(l, "--lexicon"));
    if (!a.classifier.empty()) c.classifier_path = a.classifier;
    if (!a.lm.empty()) c.lm_path = a.lm;
    for (const auto& e : a.ext) c.external_scores.push_back(parse_named(e, "--ext"));
    c.count_mode = a.distinct ? lexicon::CountMode::Distinct : lexicon::CountMode::Total;
    c.strict = a.strict;
    c.workers = a.workers;
    c.output_path = a.out;
    return c;
}

int run_audit_cmd(const audit::AuditConfig& config) {
    const auto summary = audit::run_audit(config);
    std::cerr << summary.to_json().dump(2) << '\n';
    for (const auto& e : summary.errors) std::cerr << "error: shard " << e.shard << ": " << e.message << '\n';
    return summary.errors.empty() ? 0 : kExitData;
}

int run_report(const ReportArgs& a) {
    auto records = analytics::read_audit_file(a.audit);
    nlohmann::ordered_json meta = nullptr;
    if (std::ifstream in(audit::metadata_path(a.audit), std::ios::binary); in) {
        std::ostringstream buf;
        buf << in.rdbuf();
        meta = nlohmann::ordered_json::parse(buf.str());
    }
    report::ReportOptions options{a.thresholds, a.classifier_threshold, a.ext_threshold};
    const auto rep = report::build_report(std::move(records), options, std::move(meta));
    report::write_report(rep, a.out, a.csv_dir);
    std::cerr << "report: " << rep.records.size() << " records -> " << a.out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccaudit: audit web-crawl text for lexicon hits, classifier scores and perplexity buckets"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    // One file can configure every subcommand through [sample], [audit], ...
    // sections; flags given on the command line take precedence.
    app.set_config("--config", "", "TOML file with a section per subcommand");
    app.fallthrough();

    SampleArgs sample;
    auto* sample_cmd = app.add_subcommand("sample", "Sample shard ids from a manifest");
    sample_cmd->add_option("--manifest", sample.manifest, "Manifest file, one shard per line")->required();
    sample_cmd->add_option("--rate", sample.rate, "Fraction of shards to keep")->required()->check(CLI::Range(0.0, 1.0));
    sample_cmd->add_option("--seed", sample.seed, "Random seed")->required();

    TrainLmArgs train_lm;
    auto* lm_cmd = app.add_subcommand("train-lm", "Train a Kneser-Ney n-gram model on a directory of text files");
    lm_cmd->add_option("--corpus", train_lm.corpus, "Directory of UTF-8 text files, one sentence per line")->required();
    lm_cmd->add_option("--order", train_lm.order, "Model order")->check(CLI::Range(1, 5));
    lm_cmd->add_option("--min-count", train_lm.min_count, "Tokens seen fewer times become <unk>");
    lm_cmd->add_option("--out", train_lm.out, "Model output path")->required();

    ClassifyArgs cls;
    auto* cls_cmd = app.add_subcommand("classify-train", "Train the TF-IDF logistic regression classifier");
    cls_cmd->add_option("--data", cls.data, "Training data, label<TAB>text per line")->required();
    cls_cmd->add_option("--l2", cls.l2, "L2 penalty")->check(CLI::NonNegativeNumber);
    cls_cmd->add_option("--epochs", cls.epochs, "Full-batch gradient steps");
    cls_cmd->add_option("--lr", cls.lr, "Initial learning rate")->check(CLI::PositiveNumber);
    cls_cmd->add_option("--min-df", cls.min_df, "Minimum document frequency")->check(CLI::PositiveNumber);
    cls_cmd->add_option("--ngram-max", cls.ngram_max, "Longest word n-gram feature")->check(CLI::Range(1, 5));
    cls_cmd->add_option("--seed", cls.seed, "Seed recorded with the model");
    cls_cmd->add_option("--out", cls.out, "Model output path")->required();

    AuditArgs au;
    auto* audit_cmd = app.add_subcommand("audit", "Score every document of the given shards");
    auto* shards_opt = audit_cmd->add_option("--shards", au.shards, "WET shard files (plain or gzip)");
    auto* manifest_opt = audit_cmd->add_option("--manifest", au.manifest, "Manifest to sample shards from");
    shards_opt->excludes(manifest_opt);
    audit_cmd->add_option("--rate", au.rate, "Sampling rate with --manifest (-1: unset)");
    audit_cmd->add_option("--seed", au.seed, "Sampling seed with --manifest (-1: unset)");
    audit_cmd->add_option("--lang", au.lang, "Target language code");
    audit_cmd->add_option("--max-distance", au.max_distance, "Largest accepted out-of-place distance (-1: no limit)");
    audit_cmd->add_option("--profiles", au.profiles, "Directory of *.profile files (empty: bundled en/fr/de/es)");
    audit_cmd->add_option("--lexicon", au.lexicons, "Lexicon as name=FILE, repeatable");
    audit_cmd->add_option("--classifier", au.classifier, "Classifier model from classify-train");
    audit_cmd->add_option("--lm", au.lm, "Language model from train-lm");
    audit_cmd->add_option("--ext", au.ext, "External scores as name=FILE (record_id<TAB>score), repeatable");
    audit_cmd->add_flag("--distinct", au.distinct, "Count distinct patterns instead of total occurrences");
    audit_cmd->add_flag("--strict", au.strict, "Abort the run on the first shard error");
    audit_cmd->add_option("--workers", au.workers, "Worker threads (0: available parallelism)");
    audit_cmd->add_option("--out", au.out, "Audit output (JSON lines)")->required();

    ReportArgs rep;
    auto* report_cmd = app.add_subcommand("report", "Build bucket rates and correlations from an audit file");
    report_cmd->add_option("--audit", rep.audit, "Audit file from the audit command")->required();
    report_cmd->add_option("--thresholds", rep.thresholds, "Lexicon hit thresholds")->delimiter(',');
    report_cmd->add_option("--classifier-threshold", rep.classifier_threshold, "Classifier flag threshold")
        ->check(CLI::Range(0.0, 1.0));
    report_cmd->add_option("--ext-threshold", rep.ext_threshold, "External score flag threshold");
    report_cmd->add_option("--out", rep.out, "Report JSON output")->required();
    report_cmd->add_option("--csv-dir", rep.csv_dir, "Directory for bucket_rates.csv and correlations.csv");

    for (auto* sub : app.get_subcommands({})) {
        sub->footer("Flags may also be read with --config FILE from its [" + sub->get_name() +
                    "] section; flags on the command line win.");
    }

    if (argc <= 1) {
        std::cerr << app.help();
        return kExitUsage;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*sample_cmd) {
            print_resolved(*sample_cmd);
            return run_sample(sample);
        }
        if (*lm_cmd) {
            print_resolved(*lm_cmd);
            return run_train_lm(train_lm);
        }
        if (*cls_cmd) {
            print_resolved(*cls_cmd);
            return run_classify_train(cls);
        }
        if (*audit_cmd) {
            auto config = to_config(au);
            config.validate();
            print_resolved(*audit_cmd);
            return run_audit_cmd(config);
        }
        if (*report_cmd) {
            for (auto t : rep.thresholds) {
                if (t == 0) throw UsageError("--thresholds must be positive integers");
            }
            print_resolved(*report_cmd);
            return run_report(rep);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        const bool usage = e.code() == Errc::InvalidConfig || e.code() == Errc::RateOutOfRange ||
                           e.code() == Errc::DuplicateMetricName;
        return usage ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

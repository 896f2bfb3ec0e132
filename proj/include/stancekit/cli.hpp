#pragma once

// Command-line pipeline driver.
//
// One process runs one command:
//
//   stancekit <command> [config.ini] [--key=value ...]
//
// Configuration comes from an optional INI file overlaid by --key=value
// overrides (see config.hpp). Every command validates its entire
// configuration — types, ranges, required keys, path existence, unknown-key
// rejection — before it touches any data. Each run echoes the effective
// configuration to `<command>.config.ini` and appends metrics to
// `<command>.metrics.jsonl` in the output directory; both files, like every
// other artifact, are a pure function of the configuration, so re-running a
// command with the same config reproduces them byte for byte.
//
// Exit codes: 0 success, 1 runtime failure (module-tagged message on
// stderr), 2 unknown command (usage on stderr), 3 invalid configuration
// (message names the offending key).
//
// Stream derivations per command (root = RngStream(seed)):
//   gen-synthetic       root.derive("suite")
//   pretrain-kg         root.derive("kg")
//   pretrain-sentiment  root.derive("sentiment")
//   train-stance        root.derive("stance")
//   ablate-kg-coverage  root.derive("coverage")
// These labels match the derivations used by the in-library pipeline, so a
// CLI run with seed S reproduces the corresponding library run with the
// same root stream.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stancekit/config.hpp"
#include "stancekit/error.hpp"
#include "stancekit/evalkit.hpp"
#include "stancekit/kgae.hpp"
#include "stancekit/kgraph.hpp"
#include "stancekit/metrics_log.hpp"
#include "stancekit/param_store.hpp"
#include "stancekit/rng.hpp"
#include "stancekit/stance.hpp"
#include "stancekit/textenc.hpp"

namespace stancekit::cli {

/// Default output directory when the config does not set `output_dir`.
inline constexpr const char* kOutputDirEnv = "STANCEKIT_OUTPUT_DIR";

inline const char* usage_text() {
    return
        "stancekit — knowledge-enhanced zero-shot stance detection pipeline\n"
        "\n"
        "usage:\n"
        "  stancekit <command> [config.ini] [--key=value ...]\n"
        "\n"
        "commands:\n"
        "  gen-synthetic             generate the synthetic benchmark suite\n"
        "  extract-subgraph          ingest a triple dump and cut the dataset-seeded subgraph\n"
        "  pretrain-kg               pretrain the graph autoencoder; writes concept features\n"
        "  pretrain-sentiment        pretrain the sentiment-masked text encoder\n"
        "  train-stance              train the fused stance classifier\n"
        "  evaluate                  score a checkpoint on a test split (report + predictions)\n"
        "  analyze-sentiment-stance  accuracy grid of document sentiment vs gold stance\n"
        "  ablate-kg-coverage        re-run the pipeline at reduced graph coverage\n"
        "  help                      print this text\n"
        "\n"
        "Overrides win over file values: --seed=7, --kg.epochs 80, --stance.use_kg=false.\n"
        "Top-level keys: seed (default 42), output_dir (default $STANCEKIT_OUTPUT_DIR or '.').\n"
        "Exit codes: 0 ok, 1 runtime failure, 2 unknown command, 3 invalid configuration.\n";
}

namespace detail {

struct CommandContext {
    std::string command;
    config::Config cfg;
    std::filesystem::path output_dir;
    std::uint64_t seed = 42;
    MetricsLogger log;
    std::ostream* out = nullptr; // one-line summary sink
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail("io", "cannot open file for writing: " + path.string());
    out << content;
    if (!out) fail("io", "write error: " + path.string());
}

inline std::string artifact(const CommandContext& ctx, const std::string& name) {
    return (ctx.output_dir / name).string();
}

/// Called after a command finished validating: creates the output directory,
/// echoes the effective configuration, and opens the metrics log.
inline void begin_outputs(CommandContext& ctx) {
    std::error_code ec;
    std::filesystem::create_directories(ctx.output_dir, ec);
    if (ec)
        fail("cli", "cannot create output directory '" + ctx.output_dir.string() +
                        "': " + ec.message());
    write_text_file(ctx.output_dir / (ctx.command + ".config.ini"), ctx.cfg.render());
    ctx.log.open((ctx.output_dir / (ctx.command + ".metrics.jsonl")).string());
}

inline const char* split_name(evalkit::Split s) {
    switch (s) {
        case evalkit::Split::train: return "train";
        case evalkit::Split::dev: return "dev";
        case evalkit::Split::test: return "test";
    }
    fail("cli", "invalid split value");
}

// ---- dataset schema ----

/// Reads the `[dataset]` column/label keys. Defaults match the CSV written
/// by gen-synthetic; set a column key to an empty value to mark it absent.
inline evalkit::DatasetSpec dataset_spec(config::Config& cfg) {
    evalkit::DatasetSpec spec;
    auto& c = spec.columns;
    c.document = cfg.get_string("dataset.document_column", c.document);
    c.topic = cfg.get_string("dataset.topic_column", c.topic);
    c.label = cfg.get_string("dataset.label_column", c.label);
    c.id = cfg.get_string("dataset.id_column", "id");
    c.split = cfg.get_string("dataset.split_column", "split");
    c.shot = cfg.get_string("dataset.shot_column", "shot");
    c.shot_few = cfg.get_string("dataset.shot_few", c.shot_few);
    c.shot_zero = cfg.get_string("dataset.shot_zero", c.shot_zero);
    if (c.document.empty())
        throw ConfigError("config key 'dataset.document_column' must not be empty");
    if (c.topic.empty()) throw ConfigError("config key 'dataset.topic_column' must not be empty");
    if (c.label.empty()) throw ConfigError("config key 'dataset.label_column' must not be empty");

    std::string default_phenomena;
    for (std::size_t p = 0; p < evalkit::kPhenomenonCount; ++p) {
        if (p) default_phenomena += ",";
        default_phenomena += evalkit::phenomenon_name(p);
    }
    const std::string raw = cfg.get_string("dataset.phenomenon_columns", default_phenomena);
    if (raw == "none" || raw.empty()) {
        c.phenomena.fill("");
    } else {
        std::vector<std::string> parts;
        std::string piece;
        std::istringstream in(raw);
        while (std::getline(in, piece, ',')) parts.push_back(std::string(trim(piece)));
        if (raw.back() == ',') parts.push_back("");
        if (parts.size() != evalkit::kPhenomenonCount)
            throw ConfigError("config key 'dataset.phenomenon_columns': expected " +
                              std::to_string(evalkit::kPhenomenonCount) +
                              " comma-separated column names (" + default_phenomena +
                              "), or 'none'");
        for (std::size_t p = 0; p < evalkit::kPhenomenonCount; ++p) c.phenomena[p] = parts[p];
    }

    const std::string labels = cfg.get_string("dataset.labels", "textual");
    if (labels == "textual") {
        spec.labels = evalkit::LabelMap::textual();
    } else if (labels == "numeric") {
        spec.labels = evalkit::LabelMap::numeric(cfg.require_string("dataset.label_pro"),
                                                 cfg.require_string("dataset.label_con"),
                                                 cfg.require_string("dataset.label_neu"));
    } else {
        throw ConfigError("config key 'dataset.labels': expected 'textual' or 'numeric', got '" +
                          labels + "'");
    }
    return spec;
}

/// Loads one file for one split role. Rows without a split column take the
/// role as their split, so separate per-split files and one combined file
/// with a split column both work.
inline std::vector<evalkit::StanceExample> load_split(const std::string& path,
                                                      evalkit::DatasetSpec spec,
                                                      evalkit::Split role) {
    spec.columns.default_split = role;
    auto rows = evalkit::filter_split(evalkit::load_dataset(path, spec), role);
    if (rows.empty())
        fail("cli", std::string("dataset '") + path + "' contributed no " + split_name(role) +
                        " rows");
    return rows;
}

// ---- sentiment checkpoint ----

struct SentimentCheckpoint {
    ParamStore store;
    text::Vocabulary vocab;
    text::EncoderConfig encoder;
    std::size_t rating_classes = 5;
};

inline void save_sentiment_checkpoint(const std::string& path, const ParamStore& store,
                                      const text::Vocabulary& vocab,
                                      const text::EncoderConfig& encoder,
                                      std::size_t rating_classes) {
    nlohmann::json meta;
    meta["model"] = "sentiment";
    meta["encoder"] = {{"vocab_size", encoder.vocab_size}, {"d_model", encoder.d_model},
                       {"n_blocks", encoder.n_blocks},     {"n_heads", encoder.n_heads},
                       {"d_ff", encoder.d_ff},             {"max_len", encoder.max_len}};
    meta["rating_classes"] = rating_classes;
    std::ostringstream vocab_text;
    vocab.save(vocab_text);
    meta["vocab"] = vocab_text.str();
    store.save(path, meta);
}

inline SentimentCheckpoint load_sentiment_checkpoint(const std::string& path) {
    nlohmann::json meta;
    SentimentCheckpoint ck;
    ck.store = ParamStore::load(path, &meta);
    if (meta.value("model", "") != "sentiment")
        fail("cli", "checkpoint at " + path + " is not a sentiment encoder");
    const auto& e = meta.at("encoder");
    ck.encoder.vocab_size = e.at("vocab_size").get<std::size_t>();
    ck.encoder.d_model = e.at("d_model").get<std::size_t>();
    ck.encoder.n_blocks = e.at("n_blocks").get<std::size_t>();
    ck.encoder.n_heads = e.at("n_heads").get<std::size_t>();
    ck.encoder.d_ff = e.at("d_ff").get<std::size_t>();
    ck.encoder.max_len = e.at("max_len").get<std::size_t>();
    ck.rating_classes = meta.at("rating_classes").get<std::size_t>();
    std::istringstream vocab_in(meta.at("vocab").get<std::string>());
    ck.vocab = text::Vocabulary::load(vocab_in);
    return ck;
}

// ---- shared model resources ----

struct ResourcePaths {
    std::string graph, features, pos, sentiment;
};

/// Reads every resource path key. All keys are consumed here regardless of
/// the variant so that leftover keys never trip the unknown-key check; any
/// provided path must exist.
inline ResourcePaths read_resource_paths(config::Config& cfg) {
    ResourcePaths p;
    p.graph = cfg.input_path_or("kg.graph", "");
    p.features = cfg.input_path_or("kg.features", "");
    p.pos = cfg.input_path_or("kg.pos_lexicon", "");
    p.sentiment = cfg.input_path_or("sentiment.checkpoint", "");
    return p;
}

/// A variant that enables a branch must name that branch's inputs.
inline void require_variant_paths(const stance::ModelVariant& v, const ResourcePaths& p) {
    if (v.use_kg) {
        if (p.graph.empty())
            throw ConfigError("config key 'kg.graph': a KG-enabled variant needs the knowledge "
                              "graph (written by gen-synthetic or extract-subgraph)");
        if (p.features.empty())
            throw ConfigError("config key 'kg.features': a KG-enabled variant needs the "
                              "concept-features table written by pretrain-kg");
        if (p.pos.empty())
            throw ConfigError("config key 'kg.pos_lexicon': a KG-enabled variant needs a "
                              "part-of-speech lexicon for seed-term extraction");
    }
    if (v.use_sentiment && p.sentiment.empty())
        throw ConfigError("config key 'sentiment.checkpoint': this variant needs the pretrained "
                          "sentiment encoder (written by pretrain-sentiment)");
}

/// Owns everything a StanceResources view points at. Build the view with
/// resources() at the use site; the view must not outlive this object.
struct LoadedResources {
    std::optional<kg::KnowledgeGraph> graph;
    std::optional<Tensor> features;
    std::optional<kg::PosLexicon> pos;
    std::optional<SentimentCheckpoint> sentiment;

    stance::StanceResources resources() const {
        stance::StanceResources res;
        if (graph) res.graph = &*graph;
        if (features) res.concept_features = &*features;
        if (pos) res.pos = &*pos;
        if (sentiment) {
            res.sentiment = &sentiment->store;
            res.sentiment_vocab = &sentiment->vocab;
        }
        return res;
    }
};

inline LoadedResources load_resources(const stance::ModelVariant& v, const ResourcePaths& p) {
    LoadedResources R;
    if (v.use_kg) {
        R.graph = kg::KnowledgeGraph::load_file(p.graph);
        R.features = kgae::load_concept_features(p.features, *R.graph);
        R.pos = kg::PosLexicon::load_file(p.pos);
    }
    if (v.use_sentiment) R.sentiment = load_sentiment_checkpoint(p.sentiment);
    return R;
}

// ---- shared config readers ----

inline stance::ModelVariant read_variant(config::Config& cfg) {
    stance::ModelVariant v;
    v.use_kg = cfg.get_bool("stance.use_kg", true);
    v.use_sentiment = cfg.get_bool("stance.use_sentiment", true);
    v.use_context = cfg.get_bool("stance.use_context", true);
    if (!v.use_sentiment && !v.use_context)
        throw ConfigError("config keys 'stance.use_sentiment' and 'stance.use_context' cannot "
                          "both be false; keep at least one text branch enabled");
    return v;
}

inline kgae::PretrainConfig read_kg_pretrain_config(config::Config& cfg) {
    kgae::PretrainConfig base = evalkit::synthetic_kg_config();
    base.feature_dim = cfg.get_size("kg.feature_dim", base.feature_dim);
    base.epochs = cfg.get_size("kg.epochs", base.epochs);
    base.lr = static_cast<Real>(cfg.get_double("kg.lr", static_cast<double>(base.lr)));
    base.edge_keep_prob = static_cast<Real>(
        cfg.get_double("kg.edge_keep_prob", static_cast<double>(base.edge_keep_prob)));
    base.holdout_fraction = static_cast<Real>(
        cfg.get_double("kg.holdout_fraction", static_cast<double>(base.holdout_fraction)));
    return base;
}

/// Reads the stance/context hyperparameters. The sentiment encoder geometry
/// is never configured here: it always comes from the sentiment checkpoint.
inline stance::StanceConfig read_stance_config(config::Config& cfg) {
    stance::StanceConfig base = evalkit::synthetic_stance_config();
    base.context.d_model = cfg.get_size("context.d_model", base.context.d_model);
    base.context.n_blocks = cfg.get_size("context.n_blocks", base.context.n_blocks);
    base.context.n_heads = cfg.get_size("context.n_heads", base.context.n_heads);
    base.context.d_ff = cfg.get_size("context.d_ff", base.context.d_ff);
    base.context.max_len = cfg.get_size("context.max_len", base.context.max_len);
    const std::string fusion =
        cfg.get_string("stance.fusion", stance::to_string(base.fusion_mode));
    if (fusion == "self-attention") base.fusion_mode = stance::FusionMode::self_attention;
    else if (fusion == "query-context") base.fusion_mode = stance::FusionMode::query_context;
    else
        throw ConfigError("config key 'stance.fusion': expected 'self-attention' or "
                          "'query-context', got '" + fusion + "'");
    base.lambda = static_cast<Real>(cfg.get_double("stance.lambda", static_cast<double>(base.lambda)));
    base.lr = static_cast<Real>(cfg.get_double("stance.lr", static_cast<double>(base.lr)));
    base.batch_size = cfg.get_size("stance.batch_size", base.batch_size);
    base.epochs = cfg.get_size("stance.epochs", base.epochs);
    if (base.batch_size == 0) throw ConfigError("config key 'stance.batch_size' must be positive");
    return base;
}

inline evalkit::SyntheticCounts read_counts(config::Config& cfg, const std::string& key,
                                            evalkit::SyntheticCounts fallback) {
    const std::vector<std::string> parts = cfg.get_list(key);
    if (parts.empty()) return fallback;
    if (parts.size() != 4)
        throw ConfigError("config key '" + key +
                          "': expected four counts 'pro,con,neu_unlinked,neu_plain'");
    evalkit::SyntheticCounts out;
    std::size_t* slots[4] = {&out.pro, &out.con, &out.neu_unlinked, &out.neu_plain};
    for (std::size_t i = 0; i < 4; ++i) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(parts[i], &used);
            if (used != parts[i].size()) throw std::invalid_argument("trailing");
            *slots[i] = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': cannot read '" + parts[i] +
                              "' as a count");
        }
    }
    return out;
}

inline std::vector<stance::StanceLabel> predicted_labels(
    const std::vector<stance::Prediction>& predictions) {
    std::vector<stance::StanceLabel> out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) out.push_back(p.predicted);
    return out;
}

inline std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void cmd_gen_synthetic(CommandContext& ctx) {
    evalkit::SyntheticConfig scfg;
    scfg.few_shot_topics = ctx.cfg.get_size("synthetic.few_shot_topics", scfg.few_shot_topics);
    scfg.zero_shot_topics = ctx.cfg.get_size("synthetic.zero_shot_topics", scfg.zero_shot_topics);
    scfg.aliases_per_topic =
        ctx.cfg.get_size("synthetic.aliases_per_topic", scfg.aliases_per_topic);
    scfg.junk_words = ctx.cfg.get_size("synthetic.junk_words", scfg.junk_words);
    scfg.junk_hubs = ctx.cfg.get_size("synthetic.junk_hubs", scfg.junk_hubs);
    scfg.words_per_polarity =
        ctx.cfg.get_size("synthetic.words_per_polarity", scfg.words_per_polarity);
    scfg.train_counts = read_counts(ctx.cfg, "synthetic.train_counts", scfg.train_counts);
    scfg.eval_counts = read_counts(ctx.cfg, "synthetic.eval_counts", scfg.eval_counts);
    scfg.paired_docs_per_split =
        ctx.cfg.get_size("synthetic.paired_docs_per_split", scfg.paired_docs_per_split);
    scfg.sarcasm_fraction =
        ctx.cfg.get_double("synthetic.sarcasm_fraction", scfg.sarcasm_fraction);
    scfg.quote_fraction = ctx.cfg.get_double("synthetic.quote_fraction", scfg.quote_fraction);
    scfg.sentiment_docs = ctx.cfg.get_size("synthetic.sentiment_docs", scfg.sentiment_docs);
    scfg.rating_classes = ctx.cfg.get_size("synthetic.rating_classes", scfg.rating_classes);
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const evalkit::SyntheticSuite suite =
        evalkit::generate_synthetic_suite(scfg, RngStream(ctx.seed).derive("suite"));

    suite.graph.save_file(artifact(ctx, "graph.tsv"));
    write_text_file(ctx.output_dir / "dataset.csv", evalkit::dataset_csv(suite.examples));
    write_text_file(ctx.output_dir / "pos_lexicon.tsv", suite.pos_lexicon_tsv);
    write_text_file(ctx.output_dir / "sentiment_lexicon.tsv", suite.sentiment_lexicon_tsv);
    write_text_file(ctx.output_dir / "rated_corpus.tsv",
                    evalkit::rated_corpus_tsv(suite.sentiment_corpus));

    const auto train = evalkit::filter_split(suite.examples, evalkit::Split::train);
    const auto dev = evalkit::filter_split(suite.examples, evalkit::Split::dev);
    const auto test = evalkit::filter_split(suite.examples, evalkit::Split::test);
    ctx.log.record("generate", "concepts", suite.graph.concept_count());
    ctx.log.record("generate", "triples", suite.graph.triple_count());
    ctx.log.record("generate", "train_rows", train.size());
    ctx.log.record("generate", "dev_rows", dev.size());
    ctx.log.record("generate", "test_rows", test.size());
    ctx.log.record("generate", "sentiment_docs", suite.sentiment_corpus.size());

    *ctx.out << "gen-synthetic: wrote graph.tsv, dataset.csv, pos_lexicon.tsv, "
                "sentiment_lexicon.tsv, rated_corpus.tsv to "
             << ctx.output_dir.string() << " (" << train.size() << " train / " << dev.size()
             << " dev / " << test.size() << " test rows)\n";
}

inline void cmd_extract_subgraph(CommandContext& ctx) {
    const std::string kg_path = ctx.cfg.require_input_path("subgraph.kg");
    const std::string pos_path = ctx.cfg.require_input_path("subgraph.pos_lexicon");
    const std::vector<std::string> dataset_paths = ctx.cfg.get_list("subgraph.datasets");
    if (dataset_paths.empty())
        throw ConfigError("config key 'subgraph.datasets': list at least one dataset CSV whose "
                          "documents and topics seed the subgraph");
    for (const std::string& p : dataset_paths)
        if (!std::filesystem::exists(p))
            throw ConfigError("config key 'subgraph.datasets': path '" + p + "' does not exist");

    kg::IngestOptions opt;
    const std::string format = ctx.cfg.get_string("subgraph.format", "auto");
    if (format == "auto") opt.format = kg::IngestOptions::Format::auto_detect;
    else if (format == "simple_tsv") opt.format = kg::IngestOptions::Format::simple_tsv;
    else if (format == "conceptnet_csv") opt.format = kg::IngestOptions::Format::conceptnet_csv;
    else
        throw ConfigError("config key 'subgraph.format': expected 'auto', 'simple_tsv' or "
                          "'conceptnet_csv', got '" + format + "'");
    opt.language = ctx.cfg.get_string("subgraph.language", opt.language);
    opt.relation_whitelist = ctx.cfg.get_list("subgraph.relations");
    opt.strict = ctx.cfg.get_bool("subgraph.strict", opt.strict);

    const std::string mode_str = ctx.cfg.get_string("subgraph.mode", "vicinity");
    kg::SubgraphMode mode;
    if (mode_str == "vicinity") mode = kg::SubgraphMode::vicinity;
    else if (mode_str == "incident") mode = kg::SubgraphMode::incident;
    else
        throw ConfigError("config key 'subgraph.mode': expected 'vicinity' or 'incident', got '" +
                          mode_str + "'");
    const std::string graph_out = ctx.cfg.get_string("subgraph.graph_out", "subgraph.tsv");
    const evalkit::DatasetSpec spec = dataset_spec(ctx.cfg);
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const auto [graph, report] = kg::ingest_triples_file(kg_path, opt);
    const kg::PosLexicon pos = kg::PosLexicon::load_file(pos_path);

    std::vector<std::string> texts;
    std::size_t rows = 0;
    for (const std::string& path : dataset_paths) {
        for (const auto& ex : evalkit::load_dataset(path, spec)) {
            texts.push_back(ex.document);
            texts.push_back(ex.topic);
            ++rows;
        }
    }
    const std::vector<std::string> seeds = kg::extract_seed_terms(texts, pos);
    const kg::SubgraphResult sub = kg::extract_subgraph(graph, seeds, mode);
    sub.graph.save_file(artifact(ctx, graph_out));

    ctx.log.record("ingest", "rows_read", report.rows_read);
    ctx.log.record("ingest", "rows_kept", report.rows_kept);
    ctx.log.record("ingest", "rows_malformed", report.rows_malformed);
    ctx.log.record("ingest", "rows_filtered", report.rows_filtered);
    ctx.log.record("ingest", "duplicate_triples", report.duplicate_triples);
    ctx.log.record("ingest", "concepts", graph.concept_count());
    ctx.log.record("ingest", "triples", graph.triple_count());
    ctx.log.record("subgraph", "dataset_rows", rows);
    ctx.log.record("subgraph", "seed_terms", seeds.size());
    ctx.log.record("subgraph", "seeds_resolved", sub.seeds_resolved);
    ctx.log.record("subgraph", "seeds_dropped", sub.seeds_dropped);
    ctx.log.record("subgraph", "concepts", sub.graph.concept_count());
    ctx.log.record("subgraph", "triples", sub.graph.triple_count());

    *ctx.out << "extract-subgraph: " << seeds.size() << " seed terms ("
             << sub.seeds_resolved << " resolved) -> " << sub.graph.concept_count()
             << " concepts / " << sub.graph.triple_count() << " triples -> "
             << artifact(ctx, graph_out) << "\n";
}

inline void cmd_pretrain_kg(CommandContext& ctx) {
    const std::string graph_path = ctx.cfg.require_input_path("kg.graph");
    const kgae::PretrainConfig pcfg = read_kg_pretrain_config(ctx.cfg);
    const std::string features_out = ctx.cfg.get_string("kg.features_out", "kg_features.tsv");
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const kg::KnowledgeGraph graph = kg::KnowledgeGraph::load_file(graph_path);
    RngStream rng = RngStream(ctx.seed).derive("kg");
    const kgae::PretrainResult result = kgae::pretrain_kgae(graph, pcfg, rng);

    for (const auto& epoch : result.history) {
        ctx.log.record("pretrain", "epoch", epoch.epoch);
        ctx.log.record("pretrain", "loss", epoch.loss);
        if (epoch.auc) ctx.log.record("pretrain", "holdout_auc", *epoch.auc);
    }
    ctx.log.record("pretrain", "train_triples", result.train_triples.size());
    ctx.log.record("pretrain", "holdout_triples", result.holdout_triples.size());

    ParamStore params = result.params; // export reads through a tape over the full graph
    const Tensor features = kgae::export_concept_features(graph, params, pcfg.prefix);
    kgae::save_concept_features(artifact(ctx, features_out), graph, features);
    ctx.log.record("pretrain", "feature_rows", features.shape()[0]);
    ctx.log.record("pretrain", "feature_dim", features.shape()[1]);

    std::string auc_note;
    if (!result.history.empty() && result.history.back().auc)
        auc_note = ", final holdout AUC " + fmt(*result.history.back().auc);
    *ctx.out << "pretrain-kg: " << pcfg.epochs << " epochs on " << graph.concept_count()
             << " concepts / " << graph.triple_count() << " triples, final loss "
             << (result.history.empty() ? std::string("n/a") : fmt(result.history.back().loss))
             << auc_note << "; features -> " << artifact(ctx, features_out) << "\n";
}

inline void cmd_pretrain_sentiment(CommandContext& ctx) {
    const std::string corpus_path = ctx.cfg.require_input_path("sentiment.corpus");
    const std::string lexicon_path = ctx.cfg.require_input_path("sentiment.lexicon");
    text::SentimentPretrainConfig pcfg = evalkit::synthetic_sentiment_config();
    pcfg.encoder.d_model = ctx.cfg.get_size("sentiment.d_model", pcfg.encoder.d_model);
    pcfg.encoder.n_blocks = ctx.cfg.get_size("sentiment.n_blocks", pcfg.encoder.n_blocks);
    pcfg.encoder.n_heads = ctx.cfg.get_size("sentiment.n_heads", pcfg.encoder.n_heads);
    pcfg.encoder.d_ff = ctx.cfg.get_size("sentiment.d_ff", pcfg.encoder.d_ff);
    pcfg.encoder.max_len = ctx.cfg.get_size("sentiment.max_len", pcfg.encoder.max_len);
    pcfg.p_sent = ctx.cfg.get_double("sentiment.p_sent", pcfg.p_sent);
    pcfg.p_gen = ctx.cfg.get_double("sentiment.p_gen", pcfg.p_gen);
    pcfg.rating_classes = ctx.cfg.get_size("sentiment.rating_classes", pcfg.rating_classes);
    pcfg.epochs = ctx.cfg.get_size("sentiment.epochs", pcfg.epochs);
    pcfg.lr = ctx.cfg.get_double("sentiment.lr", pcfg.lr);
    const std::size_t min_freq = ctx.cfg.get_size("sentiment.vocab_min_freq", 1);
    const std::string ckpt_out = ctx.cfg.get_string("sentiment.checkpoint_out", "sentiment.ckpt");
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const std::vector<text::RatedDocument> corpus = evalkit::load_rated_corpus(corpus_path);
    const text::SentimentLexicon lexicon = text::SentimentLexicon::load_file(lexicon_path);
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& doc : corpus) texts.push_back(doc.text);
    const text::Vocabulary vocab = text::Vocabulary::build(texts, min_freq);

    RngStream rng = RngStream(ctx.seed).derive("sentiment");
    std::vector<text::SentimentEpochStats> history;
    const ParamStore store = text::pretrain_sentiment(corpus, vocab, lexicon, pcfg, rng, &history);

    for (const auto& epoch : history) {
        ctx.log.record("pretrain", "epoch", epoch.epoch);
        ctx.log.record("pretrain", "total_loss", epoch.total);
        ctx.log.record("pretrain", "masked_token_loss", epoch.masked_token);
        ctx.log.record("pretrain", "polarity_loss", epoch.polarity);
        ctx.log.record("pretrain", "rating_loss", epoch.rating);
    }
    ctx.log.record("pretrain", "corpus_docs", corpus.size());
    ctx.log.record("pretrain", "vocab_size", vocab.size());

    text::EncoderConfig effective = pcfg.encoder;
    effective.vocab_size = vocab.size();
    save_sentiment_checkpoint(artifact(ctx, ckpt_out), store, vocab, effective,
                              pcfg.rating_classes);

    *ctx.out << "pretrain-sentiment: " << pcfg.epochs << " epochs on " << corpus.size()
             << " rated docs (vocab " << vocab.size() << "), final loss "
             << (history.empty() ? std::string("n/a") : fmt(history.back().total))
             << "; checkpoint -> " << artifact(ctx, ckpt_out) << "\n";
}

inline void cmd_train_stance(CommandContext& ctx) {
    const std::string train_path = ctx.cfg.require_input_path("dataset.train");
    const std::string dev_path = ctx.cfg.require_input_path("dataset.dev");
    const evalkit::DatasetSpec spec = dataset_spec(ctx.cfg);
    const stance::ModelVariant variant = read_variant(ctx.cfg);
    stance::StanceConfig scfg = read_stance_config(ctx.cfg);
    const ResourcePaths paths = read_resource_paths(ctx.cfg);
    require_variant_paths(variant, paths);
    const std::string ckpt_out = ctx.cfg.get_string("stance.checkpoint_out", "stance.ckpt");
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const auto train = load_split(train_path, spec, evalkit::Split::train);
    const auto dev = load_split(dev_path, spec, evalkit::Split::dev);
    const LoadedResources R = load_resources(variant, paths);
    if (R.sentiment) scfg.sentiment = R.sentiment->encoder;

    RngStream rng = RngStream(ctx.seed).derive("stance");
    const stance::TrainResult result =
        stance::train_stance(evalkit::to_labeled(train), evalkit::to_labeled(dev), R.resources(),
                             scfg, variant, rng);

    for (const auto& epoch : result.history) {
        ctx.log.record("train", "epoch", epoch.epoch);
        ctx.log.record("train", "total_loss", epoch.train_total);
        ctx.log.record("train", "classification_loss", epoch.train_classification);
        ctx.log.record("train", "reconstruction_loss", epoch.train_reconstruction);
        ctx.log.record("dev", "macro_f1", epoch.dev_macro_f1);
    }
    ctx.log.record("train", "best_epoch", result.best_epoch);
    ctx.log.record("dev", "best_macro_f1", result.best_dev_macro_f1);

    stance::save_stance_model(result.model, artifact(ctx, ckpt_out));
    *ctx.out << "train-stance: " << train.size() << " train / " << dev.size()
             << " dev rows, best dev macro-F1 " << fmt(result.best_dev_macro_f1) << " at epoch "
             << result.best_epoch << "; checkpoint -> " << artifact(ctx, ckpt_out) << "\n";
}

/// Shared by evaluate and analyze-sentiment-stance: loads the checkpoint and
/// its resources, then predicts the test rows.
struct EvalRun {
    stance::StanceModel model;
    LoadedResources R;
    std::vector<evalkit::StanceExample> test;
    std::vector<stance::Prediction> predictions;
};

inline EvalRun run_checkpoint_on_test(const std::string& ckpt_path, const ResourcePaths& paths,
                                      const std::string& test_path,
                                      const evalkit::DatasetSpec& spec) {
    EvalRun run;
    run.model = stance::load_stance_model(ckpt_path);
    require_variant_paths(run.model.variant, paths); // names the missing key, exit code 3
    run.R = load_resources(run.model.variant, paths);
    run.test = load_split(test_path, spec, evalkit::Split::test);
    const auto prepared =
        stance::prepare_examples(run.model, run.R.resources(), evalkit::to_labeled(run.test));
    run.predictions = stance::predict(run.model, prepared);
    return run;
}

inline void cmd_evaluate(CommandContext& ctx) {
    const std::string ckpt_path = ctx.cfg.require_input_path("eval.checkpoint");
    const std::string test_path = ctx.cfg.require_input_path("dataset.test");
    const evalkit::DatasetSpec spec = dataset_spec(ctx.cfg);
    const ResourcePaths paths = read_resource_paths(ctx.cfg);
    const std::string report_out = ctx.cfg.get_string("eval.report_out", "report.json");
    const std::string predictions_out =
        ctx.cfg.get_string("eval.predictions_out", "predictions.tsv");
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const EvalRun run = run_checkpoint_on_test(ckpt_path, paths, test_path, spec);
    const evalkit::MetricReport report =
        evalkit::macro_f1(predicted_labels(run.predictions), run.test);

    write_text_file(ctx.output_dir / report_out, evalkit::report_json(report).dump(2) + "\n");
    std::ostringstream preds;
    stance::write_predictions_tsv(preds, run.predictions);
    write_text_file(ctx.output_dir / predictions_out, preds.str());

    ctx.log.record("eval", "test_rows", run.test.size());
    ctx.log.record("eval", "macro_f1", report.all.macro_f1);
    ctx.log.record("eval", "zero_shot_macro_f1",
                   report.zero_shot ? nlohmann::json(report.zero_shot->macro_f1)
                                    : nlohmann::json(nullptr));
    ctx.log.record("eval", "few_shot_macro_f1",
                   report.few_shot ? nlohmann::json(report.few_shot->macro_f1)
                                   : nlohmann::json(nullptr));
    for (std::size_t p = 0; p < evalkit::kPhenomenonCount; ++p)
        ctx.log.record("eval", std::string("accuracy_") + evalkit::phenomenon_name(p),
                       report.phenomenon_accuracy[p]
                           ? nlohmann::json(*report.phenomenon_accuracy[p])
                           : nlohmann::json(nullptr));

    *ctx.out << "evaluate: " << run.test.size() << " test rows, macro-F1 "
             << fmt(report.all.macro_f1)
             << (report.zero_shot
                     ? " (zero-shot " + fmt(report.zero_shot->macro_f1) + ")"
                     : std::string())
             << "; report -> " << artifact(ctx, report_out) << "\n";
}

inline void cmd_analyze_sentiment_stance(CommandContext& ctx) {
    const std::string ckpt_path = ctx.cfg.require_input_path("analysis.checkpoint");
    const std::string lexicon_path = ctx.cfg.require_input_path("analysis.lexicon");
    const std::string test_path = ctx.cfg.require_input_path("dataset.test");
    const evalkit::DatasetSpec spec = dataset_spec(ctx.cfg);
    const ResourcePaths paths = read_resource_paths(ctx.cfg);
    const std::string matrix_out =
        ctx.cfg.get_string("analysis.matrix_out", "sentiment_stance_matrix.json");
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const text::SentimentLexicon lexicon = text::SentimentLexicon::load_file(lexicon_path);
    const EvalRun run = run_checkpoint_on_test(ckpt_path, paths, test_path, spec);

    std::vector<stance::StanceLabel> golds;
    std::vector<std::string> documents;
    golds.reserve(run.test.size());
    documents.reserve(run.test.size());
    for (const auto& ex : run.test) {
        golds.push_back(ex.gold);
        documents.push_back(ex.document);
    }
    const evalkit::SentimentStanceMatrix matrix =
        evalkit::sentiment_stance_matrix(predicted_labels(run.predictions), golds, documents,
                                         lexicon);
    write_text_file(ctx.output_dir / matrix_out, evalkit::matrix_json(matrix).dump(2) + "\n");

    static const char* kSentimentNames[] = {"Pos", "Neg", "Neu"};
    static const char* kStanceNames[] = {"Pro", "Con", "Neu"};
    for (std::size_t s = 0; s < evalkit::kSentimentCount; ++s)
        for (std::size_t g = 0; g < stance::kLabelCount; ++g) {
            const std::string cell = std::string(kSentimentNames[s]) + "_" + kStanceNames[g];
            ctx.log.record("analyze", "count_" + cell, matrix.total[s][g]);
            const auto acc = matrix.accuracy(static_cast<evalkit::DocSentiment>(s),
                                             stance::label_from_index(g));
            ctx.log.record("analyze", "accuracy_" + cell,
                           acc ? nlohmann::json(*acc) : nlohmann::json(nullptr));
        }

    *ctx.out << "analyze-sentiment-stance: " << run.test.size()
             << " test rows scored over the 3x3 sentiment/stance grid; matrix -> "
             << artifact(ctx, matrix_out) << "\n";
}

inline void cmd_ablate_kg_coverage(CommandContext& ctx) {
    const std::string train_path = ctx.cfg.require_input_path("dataset.train");
    const std::string dev_path = ctx.cfg.require_input_path("dataset.dev");
    const std::string test_path = ctx.cfg.require_input_path("dataset.test");
    const evalkit::DatasetSpec spec = dataset_spec(ctx.cfg);
    const stance::ModelVariant variant = read_variant(ctx.cfg);
    if (!variant.use_kg)
        throw ConfigError("config key 'stance.use_kg': the coverage ablation retrains the "
                          "knowledge branch and cannot run with it disabled");
    stance::StanceConfig scfg = read_stance_config(ctx.cfg);
    const kgae::PretrainConfig kg_pretrain = read_kg_pretrain_config(ctx.cfg);
    const ResourcePaths paths = read_resource_paths(ctx.cfg);
    if (paths.graph.empty())
        throw ConfigError("config key 'kg.graph': the coverage ablation needs the full knowledge "
                          "graph to subsample");
    if (paths.pos.empty())
        throw ConfigError("config key 'kg.pos_lexicon': the coverage ablation needs a "
                          "part-of-speech lexicon");
    if (variant.use_sentiment && paths.sentiment.empty())
        throw ConfigError("config key 'sentiment.checkpoint': this variant needs the pretrained "
                          "sentiment encoder");

    const std::vector<double> percents =
        ctx.cfg.get_double_list("coverage.percents", {10, 25, 50, 75, 100});
    if (percents.empty())
        throw ConfigError("config key 'coverage.percents' must list at least one percentage");
    for (double p : percents)
        if (!(p > 0.0 && p <= 100.0))
            throw ConfigError("config key 'coverage.percents': " + fmt(p) +
                              " is outside (0, 100]");
    const std::string unit = ctx.cfg.get_string("coverage.unit", "concepts");
    evalkit::CoverageMode mode;
    if (unit == "concepts") mode = evalkit::CoverageMode::concepts;
    else if (unit == "edges") mode = evalkit::CoverageMode::edges;
    else
        throw ConfigError("config key 'coverage.unit': expected 'concepts' or 'edges', got '" +
                          unit + "'");
    const std::string tsv_out = ctx.cfg.get_string("coverage.tsv_out", "coverage.tsv");
    ctx.cfg.reject_unknown();
    begin_outputs(ctx);

    const auto train = load_split(train_path, spec, evalkit::Split::train);
    const auto dev = load_split(dev_path, spec, evalkit::Split::dev);
    const auto test = load_split(test_path, spec, evalkit::Split::test);
    const kg::KnowledgeGraph graph = kg::KnowledgeGraph::load_file(paths.graph);
    const kg::PosLexicon pos = kg::PosLexicon::load_file(paths.pos);
    std::optional<SentimentCheckpoint> sentiment;
    if (variant.use_sentiment) sentiment = load_sentiment_checkpoint(paths.sentiment);
    if (sentiment) scfg.sentiment = sentiment->encoder;

    evalkit::PipelineConfig pipe;
    pipe.kg_pretrain = kg_pretrain;
    pipe.stance_cfg = scfg;
    pipe.variant = variant;
    pipe.pos = &pos;
    if (sentiment) {
        pipe.sentiment = &sentiment->store;
        pipe.sentiment_vocab = &sentiment->vocab;
    }

    const std::vector<evalkit::CoveragePoint> points = evalkit::coverage_ablation(
        graph, percents, train, dev, test, pipe, RngStream(ctx.seed).derive("coverage"), mode);

    for (const auto& point : points) {
        ctx.log.record("coverage", "percent", point.percent);
        ctx.log.record("coverage", "concepts_kept", point.concepts_kept);
        ctx.log.record("coverage", "triples_kept", point.triples_kept);
        ctx.log.record("coverage", "zero_shot_macro_f1",
                       point.zero_shot_macro_f1 ? nlohmann::json(*point.zero_shot_macro_f1)
                                                : nlohmann::json(nullptr));
    }
    std::ostringstream tsv;
    evalkit::write_coverage_tsv(tsv, points);
    write_text_file(ctx.output_dir / tsv_out, tsv.str());

    *ctx.out << "ablate-kg-coverage: " << points.size() << " " << unit
             << " coverage points -> " << artifact(ctx, tsv_out) << "\n";
}

inline const std::map<std::string, void (*)(CommandContext&)>& command_table() {
    static const std::map<std::string, void (*)(CommandContext&)> table = {
        {"gen-synthetic", &cmd_gen_synthetic},
        {"extract-subgraph", &cmd_extract_subgraph},
        {"pretrain-kg", &cmd_pretrain_kg},
        {"pretrain-sentiment", &cmd_pretrain_sentiment},
        {"train-stance", &cmd_train_stance},
        {"evaluate", &cmd_evaluate},
        {"analyze-sentiment-stance", &cmd_analyze_sentiment_stance},
        {"ablate-kg-coverage", &cmd_ablate_kg_coverage},
    };
    return table;
}

inline std::string default_output_dir() {
    const char* env = std::getenv(kOutputDirEnv);
    return (env && *env) ? std::string(env) : std::string(".");
}

} // namespace detail

/// Runs one command. `args` excludes the program name: the command word,
/// then an optional config-file path, then --key=value overrides.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.empty()) {
        err << usage_text();
        return 2;
    }
    const std::string& command = args[0];
    if (command == "help" || command == "--help" || command == "-h") {
        out << usage_text();
        return 0;
    }
    const auto& table = detail::command_table();
    const auto it = table.find(command);
    if (it == table.end()) {
        err << "unknown command '" << command << "'\n\n" << usage_text();
        return 2;
    }
    try {
        detail::CommandContext ctx;
        ctx.command = command;
        ctx.out = &out;
        std::size_t next = 1;
        if (next < args.size() && args[next].rfind("--", 0) != 0)
            ctx.cfg = config::Config::load_file(args[next++]);
        ctx.cfg.apply_overrides({args.begin() + static_cast<std::ptrdiff_t>(next), args.end()});
        ctx.seed = ctx.cfg.get_size("seed", 42);
        ctx.output_dir = ctx.cfg.get_string("output_dir", detail::default_output_dir());
        it->second(ctx);
        return 0;
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace stancekit::cli

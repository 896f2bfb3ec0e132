#pragma once

// Evaluation toolkit: stance dataset ingestion (CSV with configurable column
// and label maps), macro-F1 and per-phenomenon metric reports, lexicon-based
// document sentiment and the sentiment/stance accuracy matrix, the
// knowledge-coverage ablation driver, and a synthetic benchmark generator
// whose labels need both the sentiment and the knowledge branch to predict.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stancekit/csv.hpp"
#include "stancekit/error.hpp"
#include "stancekit/kgae.hpp"
#include "stancekit/kgraph.hpp"
#include "stancekit/rng.hpp"
#include "stancekit/stance.hpp"
#include "stancekit/text_util.hpp"
#include "stancekit/textenc.hpp"

namespace stancekit::evalkit {

using stance::StanceLabel;

// ---------------------------------------------------------------------------
// Dataset model
// ---------------------------------------------------------------------------

enum class Split { train, dev, test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    fail("evalkit", "invalid split value");
}

inline Split split_from_string(std::string_view name) {
    const std::string t = to_lower(trim(name));
    if (t == "train") return Split::train;
    if (t == "dev" || t == "val" || t == "validation") return Split::dev;
    if (t == "test") return Split::test;
    fail("evalkit", "unknown split '" + std::string(name) + "' (expected train, dev, or test)");
}

/// Whether the example's topic was seen during training (few) or not (zero).
/// Only dev/test rows carry a shot tag; training rows are not_applicable.
enum class Shot { zero, few, not_applicable };

inline const char* to_string(Shot s) {
    switch (s) {
        case Shot::zero: return "zero";
        case Shot::few: return "few";
        case Shot::not_applicable: return "n/a";
    }
    fail("evalkit", "invalid shot value");
}

/// The five challenge phenomena a test row can be flagged with:
///   Imp  - the topic is not stated in the document (implicit stance)
///   mlT  - the document is paired with multiple topics in the dataset
///   mlS  - those pairings carry different gold labels
///   Qte  - the document quotes someone
///   Sarc - the document's surface sentiment is inverted (sarcasm)
inline constexpr std::size_t kPhenomenonCount = 5;

enum class Phenomenon : std::size_t {
    implicit_topic = 0,
    multi_topic_document = 1,
    multi_label_document = 2,
    quotation = 3,
    sarcasm = 4,
};

inline const char* phenomenon_name(Phenomenon p) {
    switch (p) {
        case Phenomenon::implicit_topic: return "Imp";
        case Phenomenon::multi_topic_document: return "mlT";
        case Phenomenon::multi_label_document: return "mlS";
        case Phenomenon::quotation: return "Qte";
        case Phenomenon::sarcasm: return "Sarc";
    }
    fail("evalkit", "invalid phenomenon value");
}

inline const char* phenomenon_name(std::size_t index) {
    if (index >= kPhenomenonCount) fail("evalkit", "phenomenon index out of range");
    return phenomenon_name(static_cast<Phenomenon>(index));
}

using PhenomenaFlags = std::array<bool, kPhenomenonCount>;

struct StanceExample {
    std::string id;
    std::string document;
    std::string topic;
    StanceLabel gold = StanceLabel::Neu;
    Split split = Split::train;
    Shot shot = Shot::not_applicable;
    PhenomenaFlags phenomena{};

    bool operator==(const StanceExample&) const = default;
};

inline stance::LabeledExample to_labeled(const StanceExample& ex) {
    return stance::LabeledExample{ex.id, ex.document, ex.topic, ex.gold};
}

inline std::vector<stance::LabeledExample> to_labeled(const std::vector<StanceExample>& examples) {
    std::vector<stance::LabeledExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(to_labeled(ex));
    return out;
}

inline std::vector<StanceExample> filter_split(const std::vector<StanceExample>& examples,
                                               Split split) {
    std::vector<StanceExample> out;
    for (const auto& ex : examples)
        if (ex.split == split) out.push_back(ex);
    return out;
}

// ---------------------------------------------------------------------------
// Label and column maps
// ---------------------------------------------------------------------------

/// Maps raw label cell values (trimmed, lowercased) to stance labels. The
/// default accepts the textual pro/con/neutral coding (plus the abbreviated
/// neu); datasets with a numeric coding must declare it explicitly because
/// numeric conventions vary between releases.
struct LabelMap {
    std::map<std::string, StanceLabel> by_token;

    static LabelMap textual() {
        LabelMap m;
        m.by_token = {{"pro", StanceLabel::Pro},
                      {"con", StanceLabel::Con},
                      {"neutral", StanceLabel::Neu},
                      {"neu", StanceLabel::Neu}};
        return m;
    }

    /// Declares the cell values standing for each class, e.g. ("1","0","2").
    static LabelMap numeric(std::string_view pro, std::string_view con, std::string_view neu) {
        LabelMap m;
        m.by_token = {{to_lower(trim(pro)), StanceLabel::Pro},
                      {to_lower(trim(con)), StanceLabel::Con},
                      {to_lower(trim(neu)), StanceLabel::Neu}};
        return m;
    }

    std::optional<StanceLabel> lookup(std::string_view raw) const {
        auto it = by_token.find(to_lower(trim(raw)));
        if (it == by_token.end()) return std::nullopt;
        return it->second;
    }
};

/// Names the dataset's columns. Document, topic, and label are required; the
/// rest are optional (empty name = column absent). Naming an optional column
/// that the file lacks is an error: a declared column must exist.
struct ColumnMap {
    std::string document = "document";
    std::string topic = "topic";
    std::string label = "label";
    std::string id;    // empty -> ids synthesized as row1, row2, ...
    std::string split; // empty -> every row gets default_split
    std::string shot;  // empty -> dev/test rows get no shot tag
    std::array<std::string, kPhenomenonCount> phenomena{};

    Split default_split = Split::train;
    std::string shot_few = "few";   // shot-column value meaning a seen topic
    std::string shot_zero = "zero"; // shot-column value meaning an unseen topic
};

struct DatasetSpec {
    ColumnMap columns;
    LabelMap labels = LabelMap::textual();
};

namespace detail {

inline std::size_t require_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) == name) return i;
    fail("evalkit", "dataset is missing required column '" + name + "'");
}

inline std::optional<std::size_t> optional_column(const std::vector<std::string>& header,
                                                  const std::string& name) {
    if (name.empty()) return std::nullopt;
    return require_column(header, name);
}

inline bool parse_flag(std::string_view raw, std::size_t line, const char* column) {
    const std::string t = to_lower(trim(raw));
    if (t == "1" || t == "true" || t == "yes" || t == "y") return true;
    if (t.empty() || t == "0" || t == "false" || t == "no" || t == "n") return false;
    fail("evalkit", "unreadable flag '" + std::string(raw) + "' in column '" + column +
                        "' at line " + std::to_string(line));
}

} // namespace detail

inline std::vector<StanceExample> parse_dataset(std::istream& in, const DatasetSpec& spec) {
    const CsvTable table = CsvTable::read(in);
    const ColumnMap& cols = spec.columns;

    const std::size_t c_doc = detail::require_column(table.header, cols.document);
    const std::size_t c_topic = detail::require_column(table.header, cols.topic);
    const std::size_t c_label = detail::require_column(table.header, cols.label);
    const auto c_id = detail::optional_column(table.header, cols.id);
    const auto c_split = detail::optional_column(table.header, cols.split);
    const auto c_shot = detail::optional_column(table.header, cols.shot);
    std::array<std::optional<std::size_t>, kPhenomenonCount> c_phen;
    for (std::size_t p = 0; p < kPhenomenonCount; ++p)
        c_phen[p] = detail::optional_column(table.header, cols.phenomena[p]);

    std::vector<StanceExample> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::vector<std::string>& fields = table.rows[r];
        const std::size_t line = table.row_lines[r];
        if (fields.size() != table.header.size())
            fail("evalkit", "row at line " + std::to_string(line) + " has " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(table.header.size()));
        StanceExample ex;
        ex.document = fields[c_doc];
        ex.topic = trim(fields[c_topic]);
        if (trim(ex.document).empty())
            fail("evalkit", "missing required field '" + cols.document + "' at line " +
                                std::to_string(line));
        if (ex.topic.empty())
            fail("evalkit",
                 "missing required field '" + cols.topic + "' at line " + std::to_string(line));
        const std::string& raw_label = fields[c_label];
        if (trim(raw_label).empty())
            fail("evalkit",
                 "missing required field '" + cols.label + "' at line " + std::to_string(line));
        const auto label = spec.labels.lookup(raw_label);
        if (!label)
            fail("evalkit",
                 "unknown label '" + trim(raw_label) + "' at line " + std::to_string(line));
        ex.gold = *label;
        ex.id = c_id ? trim(fields[*c_id]) : "row" + std::to_string(r + 1);
        if (ex.id.empty())
            fail("evalkit",
                 "missing required field '" + cols.id + "' at line " + std::to_string(line));
        ex.split = c_split ? split_from_string(fields[*c_split]) : cols.default_split;

        // Shot tags only apply to dev/test rows; a value in a training row's
        // shot column is ignored rather than rejected, since some releases
        // fill the column uniformly.
        ex.shot = Shot::not_applicable;
        if (ex.split != Split::train && c_shot) {
            const std::string raw = trim(fields[*c_shot]);
            if (raw == cols.shot_few) ex.shot = Shot::few;
            else if (raw == cols.shot_zero) ex.shot = Shot::zero;
            else if (!raw.empty())
                fail("evalkit", "unknown shot value '" + raw + "' at line " +
                                    std::to_string(line) + " (expected '" + cols.shot_few +
                                    "' or '" + cols.shot_zero + "')");
        }
        for (std::size_t p = 0; p < kPhenomenonCount; ++p)
            if (c_phen[p])
                ex.phenomena[p] =
                    detail::parse_flag(fields[*c_phen[p]], line, cols.phenomena[p].c_str());
        out.push_back(std::move(ex));
    }
    return out;
}

inline std::vector<StanceExample> load_dataset(const std::string& path,
                                               const DatasetSpec& spec = {}) {
    std::istringstream in(read_text_file(path, "evalkit"));
    return parse_dataset(in, spec);
}

/// Serializes examples in the same schema the default synthetic-suite
/// DatasetSpec reads back (see synthetic_dataset_spec below).
inline std::string dataset_csv(const std::vector<StanceExample>& examples) {
    std::ostringstream out;
    std::vector<std::string> fields{"id", "document", "topic", "label", "split", "shot"};
    for (std::size_t p = 0; p < kPhenomenonCount; ++p) fields.push_back(phenomenon_name(p));
    write_csv_row(out, fields);
    for (const auto& ex : examples) {
        fields = {ex.id,
                  ex.document,
                  ex.topic,
                  to_string(ex.gold),
                  to_string(ex.split),
                  ex.shot == Shot::not_applicable ? "" : to_string(ex.shot)};
        for (std::size_t p = 0; p < kPhenomenonCount; ++p)
            fields.push_back(ex.phenomena[p] ? "1" : "0");
        write_csv_row(out, fields);
    }
    return out.str();
}

inline DatasetSpec synthetic_dataset_spec() {
    DatasetSpec spec;
    spec.columns.id = "id";
    spec.columns.split = "split";
    spec.columns.shot = "shot";
    for (std::size_t p = 0; p < kPhenomenonCount; ++p)
        spec.columns.phenomena[p] = phenomenon_name(p);
    return spec;
}

// ---------------------------------------------------------------------------
// Metric reports
// ---------------------------------------------------------------------------

/// Per-class F1 plus macro-F1 overall and restricted by shot tag, and the
/// per-phenomenon accuracies. Subset entries are absent when no row carries
/// the tag (undefined, never reported as 0).
struct MetricReport {
    stance::F1Summary all;
    std::optional<stance::F1Summary> zero_shot;
    std::optional<stance::F1Summary> few_shot;
    std::array<std::optional<double>, kPhenomenonCount> phenomenon_accuracy{};
};

inline std::array<std::optional<double>, kPhenomenonCount>
breakdown_eval(const std::vector<StanceLabel>& predictions, const std::vector<StanceLabel>& golds,
               const std::vector<PhenomenaFlags>& phenomena) {
    if (predictions.size() != golds.size() || predictions.size() != phenomena.size())
        fail("evalkit", "phenomenon breakdown inputs differ in length");
    std::array<std::optional<double>, kPhenomenonCount> out{};
    for (std::size_t p = 0; p < kPhenomenonCount; ++p) {
        std::size_t flagged = 0, correct = 0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            if (!phenomena[i][p]) continue;
            ++flagged;
            if (predictions[i] == golds[i]) ++correct;
        }
        if (flagged > 0)
            out[p] = static_cast<double>(correct) / static_cast<double>(flagged);
    }
    return out;
}

inline MetricReport macro_f1(const std::vector<StanceLabel>& predictions,
                             const std::vector<StanceLabel>& golds) {
    MetricReport report;
    report.all = stance::f1_summary(predictions, golds);
    return report;
}

inline MetricReport macro_f1(const std::vector<StanceLabel>& predictions,
                             const std::vector<StanceExample>& examples) {
    if (predictions.size() != examples.size())
        fail("evalkit", "macro-F1 inputs differ in length (" + std::to_string(predictions.size()) +
                            " predictions vs " + std::to_string(examples.size()) + " examples)");
    std::vector<StanceLabel> golds;
    std::vector<PhenomenaFlags> phenomena;
    golds.reserve(examples.size());
    phenomena.reserve(examples.size());
    for (const auto& ex : examples) {
        golds.push_back(ex.gold);
        phenomena.push_back(ex.phenomena);
    }
    MetricReport report = macro_f1(predictions, golds);
    auto subset = [&](Shot shot) -> std::optional<stance::F1Summary> {
        std::vector<StanceLabel> p, g;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            if (examples[i].shot != shot) continue;
            p.push_back(predictions[i]);
            g.push_back(golds[i]);
        }
        if (p.empty()) return std::nullopt;
        return stance::f1_summary(p, g);
    };
    report.zero_shot = subset(Shot::zero);
    report.few_shot = subset(Shot::few);
    report.phenomenon_accuracy = breakdown_eval(predictions, golds, phenomena);
    return report;
}

namespace detail {

inline nlohmann::json summary_json(const stance::F1Summary& s) {
    static const char* kClassNames[stance::kLabelCount] = {"pro", "con", "neu"};
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t c = 0; c < stance::kLabelCount; ++c)
        per_class[kClassNames[c]] = {{"precision", s.per_class[c].precision},
                                     {"recall", s.per_class[c].recall},
                                     {"f1", s.per_class[c].f1}};
    nlohmann::json confusion = nlohmann::json::array();
    for (const auto& row : s.confusion) {
        nlohmann::json r = nlohmann::json::array();
        for (std::size_t v : row) r.push_back(v);
        confusion.push_back(r);
    }
    return {{"per_class", per_class}, {"macro_f1", s.macro_f1}, {"confusion", confusion}};
}

} // namespace detail

inline nlohmann::json report_json(const MetricReport& report) {
    nlohmann::json shots;
    shots["all"] = detail::summary_json(report.all);
    shots["zero"] = report.zero_shot ? detail::summary_json(*report.zero_shot)
                                     : nlohmann::json(nullptr);
    shots["few"] =
        report.few_shot ? detail::summary_json(*report.few_shot) : nlohmann::json(nullptr);
    nlohmann::json phenomena = nlohmann::json::object();
    for (std::size_t p = 0; p < kPhenomenonCount; ++p)
        phenomena[phenomenon_name(p)] = report.phenomenon_accuracy[p]
                                            ? nlohmann::json(*report.phenomenon_accuracy[p])
                                            : nlohmann::json(nullptr);
    return {{"macro_f1", report.all.macro_f1}, {"shots", shots}, {"phenomena", phenomena}};
}

// ---------------------------------------------------------------------------
// Document sentiment and the sentiment/stance matrix
// ---------------------------------------------------------------------------

enum class DocSentiment : std::size_t { positive = 0, negative = 1, neutral = 2 };

inline constexpr std::size_t kSentimentCount = 3;

inline const char* to_string(DocSentiment s) {
    switch (s) {
        case DocSentiment::positive: return "Pos";
        case DocSentiment::negative: return "Neg";
        case DocSentiment::neutral: return "Neu";
    }
    fail("evalkit", "invalid document sentiment value");
}

/// Counts positive vs negative lexicon tokens: strictly more positive -> Pos,
/// strictly more negative -> Neg, any tie (including no lexicon words) -> Neu.
inline DocSentiment doc_sentiment(std::string_view document,
                                  const text::SentimentLexicon& lexicon) {
    std::size_t pos = 0, neg = 0;
    for (const std::string& token : word_tokenize(document)) {
        const auto polarity = lexicon.lookup(token);
        if (!polarity) continue;
        if (*polarity == text::Polarity::positive) ++pos;
        else ++neg;
    }
    if (pos > neg) return DocSentiment::positive;
    if (neg > pos) return DocSentiment::negative;
    return DocSentiment::neutral;
}

/// Accuracy grid over (document sentiment, gold stance) cells. Rows follow
/// DocSentiment order (Pos, Neg, Neu), columns StanceLabel order
/// (Pro, Con, Neu). Cells with no examples are undefined.
struct SentimentStanceMatrix {
    std::array<std::array<std::size_t, stance::kLabelCount>, kSentimentCount> total{};
    std::array<std::array<std::size_t, stance::kLabelCount>, kSentimentCount> correct{};

    std::optional<double> accuracy(DocSentiment s, StanceLabel g) const {
        const std::size_t n = total[static_cast<std::size_t>(s)][stance::label_index(g)];
        if (n == 0) return std::nullopt;
        const std::size_t c = correct[static_cast<std::size_t>(s)][stance::label_index(g)];
        return static_cast<double>(c) / static_cast<double>(n);
    }
};

inline SentimentStanceMatrix sentiment_stance_matrix(const std::vector<StanceLabel>& predictions,
                                                     const std::vector<StanceLabel>& golds,
                                                     const std::vector<std::string>& documents,
                                                     const text::SentimentLexicon& lexicon) {
    if (predictions.size() != golds.size() || predictions.size() != documents.size())
        fail("evalkit", "sentiment/stance matrix inputs differ in length");
    SentimentStanceMatrix m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto s = static_cast<std::size_t>(doc_sentiment(documents[i], lexicon));
        const auto g = stance::label_index(golds[i]);
        ++m.total[s][g];
        if (predictions[i] == golds[i]) ++m.correct[s][g];
    }
    return m;
}

inline nlohmann::json matrix_json(const SentimentStanceMatrix& m) {
    nlohmann::json accuracy = nlohmann::json::array();
    nlohmann::json counts = nlohmann::json::array();
    for (std::size_t s = 0; s < kSentimentCount; ++s) {
        nlohmann::json arow = nlohmann::json::array();
        nlohmann::json crow = nlohmann::json::array();
        for (std::size_t g = 0; g < stance::kLabelCount; ++g) {
            const auto acc = m.accuracy(static_cast<DocSentiment>(s),
                                        stance::label_from_index(g));
            arow.push_back(acc ? nlohmann::json(*acc) : nlohmann::json(nullptr));
            crow.push_back(m.total[s][g]);
        }
        accuracy.push_back(arow);
        counts.push_back(crow);
    }
    return {{"rows", {"Pos", "Neg", "Neu"}},
            {"cols", {"Pro", "Con", "Neu"}},
            {"accuracy", accuracy},
            {"counts", counts}};
}

// ---------------------------------------------------------------------------
// Full pipeline (knowledge pretraining + stance training + test evaluation)
// ---------------------------------------------------------------------------

/// Everything a stance run needs besides the graph and the dataset. The
/// sentiment encoder and lexicons are pretrained/loaded once and shared
/// across runs; the knowledge features are produced inside the run so that
/// graph ablations retrain them.
struct PipelineConfig {
    kgae::PretrainConfig kg_pretrain;
    stance::StanceConfig stance_cfg;
    stance::ModelVariant variant = stance::ModelVariant::full();
    const kg::PosLexicon* pos = nullptr;
    const ParamStore* sentiment = nullptr;
    const text::Vocabulary* sentiment_vocab = nullptr;
};

struct PipelineResult {
    std::vector<kgae::EpochMetrics> kg_history;
    Tensor concept_features;
    stance::TrainResult stance;
    std::vector<stance::Prediction> test_predictions;
    MetricReport test_report;
};

/// One deterministic end-to-end run: pretrain the graph autoencoder on
/// `graph` (skipped for variants without the knowledge branch), train the
/// stance model with best-dev checkpointing, and evaluate on the test rows.
/// Stream use: derive("kg") for the autoencoder, derive("stance") for stance
/// training; the caller's stream is never advanced.
inline PipelineResult run_stance_pipeline(const kg::KnowledgeGraph& graph,
                                          const std::vector<StanceExample>& train,
                                          const std::vector<StanceExample>& dev,
                                          const std::vector<StanceExample>& test,
                                          const PipelineConfig& pipe, const RngStream& rng) {
    if (test.empty()) fail("evalkit", "pipeline needs a non-empty test split");
    PipelineResult result;
    stance::StanceResources res;
    res.pos = pipe.pos;
    res.sentiment = pipe.sentiment;
    res.sentiment_vocab = pipe.sentiment_vocab;
    if (pipe.variant.use_kg) {
        RngStream kg_rng = rng.derive("kg");
        kgae::PretrainResult kg = kgae::pretrain_kgae(graph, pipe.kg_pretrain, kg_rng);
        result.kg_history = std::move(kg.history);
        result.concept_features =
            kgae::export_concept_features(graph, kg.params, pipe.kg_pretrain.prefix);
        res.graph = &graph;
        res.concept_features = &result.concept_features;
    }
    result.stance = stance::train_stance(to_labeled(train), to_labeled(dev), res, pipe.stance_cfg,
                                         pipe.variant, rng.derive("stance"));
    const auto prepared = stance::prepare_examples(result.stance.model, res, to_labeled(test));
    result.test_predictions = stance::predict(result.stance.model, prepared);
    std::vector<StanceLabel> preds;
    preds.reserve(test.size());
    for (const auto& p : result.test_predictions) preds.push_back(p.predicted);
    result.test_report = macro_f1(preds, test);
    return result;
}

// ---------------------------------------------------------------------------
// Knowledge-coverage ablation
// ---------------------------------------------------------------------------

enum class CoverageMode {
    concepts, // keep a percentage of concepts; retain triples both of whose endpoints survive
    edges     // keep every concept; retain a percentage of triples
};

struct GraphSample {
    kg::KnowledgeGraph graph;
    std::size_t concepts_kept = 0;
    std::size_t triples_kept = 0;
};

namespace detail {

inline void validate_percent(double percent) {
    if (!(percent > 0.0 && percent <= 100.0))
        fail("evalkit", "coverage percent must lie in (0, 100], got " + format_double(percent));
}

inline GraphSample copy_whole_graph(const kg::KnowledgeGraph& graph) {
    return GraphSample{graph, graph.concept_count(), graph.triple_count()};
}

} // namespace detail

/// Keeps round(percent% of concepts), chosen uniformly without replacement,
/// and the triples induced by the surviving concept set. Relation ids are
/// preserved; surviving concepts keep their relative order. percent == 100
/// returns the graph unchanged without drawing from the stream.
inline GraphSample subsample_graph_concepts(const kg::KnowledgeGraph& graph, double percent,
                                            RngStream& rng) {
    detail::validate_percent(percent);
    if (percent == 100.0) return detail::copy_whole_graph(graph);
    const std::size_t n = graph.concept_count();
    const auto k = static_cast<std::size_t>(
        std::llround(percent / 100.0 * static_cast<double>(n)));
    const std::vector<std::size_t> kept = rng.sample_indices(n, k);
    std::vector<std::size_t> new_id(n, n);
    kg::KnowledgeGraph::Builder b;
    for (const std::string& rel : graph.relations()) b.intern_relation(rel);
    for (std::size_t old_id : kept) new_id[old_id] = b.intern_concept(graph.concept_surface(old_id));
    GraphSample out;
    for (const kg::Triple& t : graph.triples()) {
        if (new_id[t.head] == n || new_id[t.tail] == n) continue;
        b.add_triple(static_cast<kg::NodeId>(new_id[t.head]), t.rel,
                     static_cast<kg::NodeId>(new_id[t.tail]));
        ++out.triples_kept;
    }
    out.concepts_kept = k;
    out.graph = b.build();
    return out;
}

/// Keeps round(percent% of triples) and every concept, so only the edge set
/// thins out. percent == 100 returns the graph unchanged without drawing.
inline GraphSample subsample_graph_edges(const kg::KnowledgeGraph& graph, double percent,
                                         RngStream& rng) {
    detail::validate_percent(percent);
    if (percent == 100.0) return detail::copy_whole_graph(graph);
    const std::size_t n = graph.triple_count();
    const auto k = static_cast<std::size_t>(
        std::llround(percent / 100.0 * static_cast<double>(n)));
    const std::vector<std::size_t> kept = rng.sample_indices(n, k);
    kg::KnowledgeGraph::Builder b;
    for (const std::string& rel : graph.relations()) b.intern_relation(rel);
    for (const std::string& surface : graph.concepts()) b.intern_concept(surface);
    for (std::size_t idx : kept) {
        const kg::Triple& t = graph.triples()[idx];
        b.add_triple(t.head, t.rel, t.tail);
    }
    GraphSample out;
    out.concepts_kept = graph.concept_count();
    out.triples_kept = k;
    out.graph = b.build();
    return out;
}

struct CoveragePoint {
    double percent = 0;
    std::size_t concepts_kept = 0;
    std::size_t triples_kept = 0;
    std::optional<double> zero_shot_macro_f1; // absent when no triples survived
};

/// Runs the full pipeline once per requested coverage percentage on a seeded
/// subsample of the graph and records the zero-shot test macro-F1. Points
/// are independent: each derives its streams from its percent value alone
/// (derive(format_double(percent)), then "subsample" for the draw and
/// "pipeline" for the run), so a 100% point reproduces the direct pipeline
/// run rng.derive("100").derive("pipeline") bit for bit. A subsample that
/// loses every triple is recorded as undefined and trains nothing.
inline std::vector<CoveragePoint> coverage_ablation(
    const kg::KnowledgeGraph& graph, const std::vector<double>& percents,
    const std::vector<StanceExample>& train, const std::vector<StanceExample>& dev,
    const std::vector<StanceExample>& test, const PipelineConfig& pipe, const RngStream& rng,
    CoverageMode mode = CoverageMode::concepts) {
    if (!pipe.variant.use_kg)
        fail("evalkit", "coverage ablation requires a variant with the knowledge branch enabled");
    if (percents.empty()) fail("evalkit", "coverage ablation needs at least one percent");
    std::vector<CoveragePoint> out;
    out.reserve(percents.size());
    for (double percent : percents) {
        detail::validate_percent(percent);
        const RngStream point_rng = rng.derive(format_double(percent));
        RngStream sub_rng = point_rng.derive("subsample");
        const GraphSample sample = mode == CoverageMode::concepts
                                       ? subsample_graph_concepts(graph, percent, sub_rng)
                                       : subsample_graph_edges(graph, percent, sub_rng);
        CoveragePoint point;
        point.percent = percent;
        point.concepts_kept = sample.concepts_kept;
        point.triples_kept = sample.triples_kept;
        if (sample.triples_kept > 0) {
            const PipelineResult result = run_stance_pipeline(sample.graph, train, dev, test, pipe,
                                                              point_rng.derive("pipeline"));
            if (!result.test_report.zero_shot)
                fail("evalkit", "coverage ablation needs zero-shot test rows");
            point.zero_shot_macro_f1 = result.test_report.zero_shot->macro_f1;
        }
        out.push_back(point);
    }
    return out;
}

/// TSV curve, one row per requested percent: `percent<TAB>macro_f1`, with
/// `undefined` for points whose subsample had no triples.
inline void write_coverage_tsv(std::ostream& out, const std::vector<CoveragePoint>& points) {
    out << "percent\tmacro_f1\n";
    for (const CoveragePoint& p : points) {
        out << format_double(p.percent) << '\t';
        if (p.zero_shot_macro_f1) out << format_double(*p.zero_shot_macro_f1);
        else out << "undefined";
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Synthetic benchmark generator
// ---------------------------------------------------------------------------

/// Per-topic row counts for one split.
struct SyntheticCounts {
    std::size_t pro = 0;          // linked mention + positive wording
    std::size_t con = 0;          // linked mention + negative wording
    std::size_t neu_unlinked = 0; // off-topic mention + sentiment wording
    std::size_t neu_plain = 0;    // no sentiment wording

    std::size_t total() const { return pro + con + neu_unlinked + neu_plain; }
};

/// Sizes and signal knobs for the generated benchmark. The construction makes
/// both model branches necessary:
///   - dev/test documents use sentiment words and off-topic mentions that
///     never occur in the training documents, so the trainable context
///     encoder meets them as unknown tokens and only the pretrained frozen
///     sentiment encoder can read their polarity;
///   - zero-shot topics (and their aliases) never occur in training rows, so
///     only the knowledge graph can tell their linked mentions apart from
///     off-topic ones.
struct SyntheticConfig {
    std::size_t few_shot_topics = 6;  // topics with training rows
    std::size_t zero_shot_topics = 4; // topics appearing only in dev/test
    std::size_t aliases_per_topic = 2;
    std::size_t junk_words = 12; // off-topic mentions; first half train, second half dev/test
    std::size_t junk_hubs = 2;   // the concepts the off-topic mentions connect to
    std::size_t words_per_polarity = 16; // lexicon size; first half train, second half dev/test
    SyntheticCounts train_counts{16, 16, 10, 6};
    SyntheticCounts eval_counts{2, 2, 1, 1}; // per topic, for dev and again for test
    std::size_t paired_docs_per_split = 3;   // extra row pairs sharing one document (mlT/mlS)
    double sarcasm_fraction = 0.06;          // extra test rows with inverted surface wording
    double quote_fraction = 0.2;             // chance a sentiment row uses the quoting template
    std::size_t sentiment_docs = 200;        // rated pretraining corpus size
    std::size_t rating_classes = 5;
};

/// Generation ground truth for one example, for analysis and test oracles.
struct SyntheticProvenance {
    bool linked = false; // document mentions the topic or one of its aliases
    int intended = 0;    // +1 positive, -1 negative, 0 none (pre-sarcasm wording)
    bool sarcastic = false;
};

struct SyntheticSuite {
    kg::KnowledgeGraph graph;
    std::string pos_lexicon_tsv;       // kg::PosLexicon::parse round-trips this
    std::string sentiment_lexicon_tsv; // text::SentimentLexicon::parse round-trips this
    kg::PosLexicon pos;
    text::SentimentLexicon lexicon;
    std::vector<text::RatedDocument> sentiment_corpus;
    std::vector<StanceExample> examples; // train, then dev, then test
    std::vector<SyntheticProvenance> provenance; // parallel to examples
};

namespace detail {

// Vocabulary of the generated world. All surface forms are single
// alphanumeric tokens so word tokenization, concept normalization, and
// vocabulary building all see the same unit.
inline std::string topic_word(std::size_t i) { return "topic" + std::to_string(i); }
inline std::string alias_word(std::size_t topic, std::size_t a) {
    return "alias" + std::to_string(topic) + std::string(1, static_cast<char>('a' + a));
}
inline std::string junk_word(std::size_t i) { return "gizmo" + std::to_string(i); }
inline std::string junk_hub_word(std::size_t i) { return "gizmohub" + std::to_string(i); }
inline std::string positive_word(std::size_t i) { return "fine" + std::to_string(i); }
inline std::string negative_word(std::size_t i) { return "grim" + std::to_string(i); }

inline void validate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.few_shot_topics == 0)
        fail("evalkit", "synthetic suite needs at least one training topic");
    if (cfg.zero_shot_topics == 0)
        fail("evalkit", "synthetic suite needs at least one zero-shot topic");
    if (cfg.aliases_per_topic == 0 || cfg.aliases_per_topic > 26)
        fail("evalkit", "aliases per topic must lie in 1..26");
    if (cfg.junk_words < 2)
        fail("evalkit", "synthetic suite needs at least two off-topic mention words");
    if (cfg.junk_hubs == 0) fail("evalkit", "synthetic suite needs at least one junk hub");
    if (cfg.words_per_polarity < 2)
        fail("evalkit", "synthetic suite needs at least two words per polarity");
    if (cfg.train_counts.total() == 0 || cfg.eval_counts.total() == 0)
        fail("evalkit", "per-topic row counts must not be all zero");
    if (cfg.eval_counts.pro == 0 || cfg.eval_counts.con == 0)
        fail("evalkit", "dev/test rows need pro and con counts to populate every class");
    if (!(cfg.sarcasm_fraction >= 0.0 && cfg.sarcasm_fraction < 1.0))
        fail("evalkit", "sarcasm fraction must lie in [0, 1)");
    if (!(cfg.quote_fraction >= 0.0 && cfg.quote_fraction <= 1.0))
        fail("evalkit", "quote fraction must lie in [0, 1]");
    if (cfg.sentiment_docs == 0) fail("evalkit", "sentiment corpus size must be positive");
    if (cfg.rating_classes < 3)
        fail("evalkit", "rating scale needs at least 3 classes for pos/neutral/neg anchors");
}

/// Word pools split between training rows (first half) and dev/test rows
/// (second half) so evaluation documents contain word-level surprises.
struct SyntheticPools {
    std::vector<std::string> topics;              // few-shot first, then zero-shot
    std::vector<std::vector<std::string>> aliases; // per topic
    std::vector<std::string> junk_train, junk_eval;
    std::vector<std::string> pos_train, pos_eval;
    std::vector<std::string> neg_train, neg_eval;

    const std::vector<std::string>& junk(Split split) const {
        return split == Split::train ? junk_train : junk_eval;
    }
    const std::vector<std::string>& sentiment(Split split, bool positive) const {
        if (positive) return split == Split::train ? pos_train : pos_eval;
        return split == Split::train ? neg_train : neg_eval;
    }
};

inline SyntheticPools make_pools(const SyntheticConfig& cfg) {
    SyntheticPools pools;
    const std::size_t topics = cfg.few_shot_topics + cfg.zero_shot_topics;
    for (std::size_t t = 0; t < topics; ++t) {
        pools.topics.push_back(topic_word(t));
        std::vector<std::string> aliases;
        for (std::size_t a = 0; a < cfg.aliases_per_topic; ++a)
            aliases.push_back(alias_word(t, a));
        pools.aliases.push_back(std::move(aliases));
    }
    for (std::size_t j = 0; j < cfg.junk_words; ++j) {
        if (j < cfg.junk_words / 2) pools.junk_train.push_back(junk_word(j));
        else pools.junk_eval.push_back(junk_word(j));
    }
    for (std::size_t w = 0; w < cfg.words_per_polarity; ++w) {
        if (w < cfg.words_per_polarity / 2) {
            pools.pos_train.push_back(positive_word(w));
            pools.neg_train.push_back(negative_word(w));
        } else {
            pools.pos_eval.push_back(positive_word(w));
            pools.neg_eval.push_back(negative_word(w));
        }
    }
    return pools;
}

/// Aliases connect to their topic through one relation; off-topic mentions
/// connect to the shared hubs through another. The relation split gives the
/// message-passing encoder a structural cue that transfers to topics never
/// seen in training text. Every concept also carries a self-loop, so any
/// non-empty concept subsample still induces at least its loop triples and a
/// coverage ablation never bottoms out at an empty graph.
inline kg::KnowledgeGraph make_graph(const SyntheticConfig& cfg, const SyntheticPools& pools) {
    kg::KnowledgeGraph::Builder b;
    std::vector<std::string> all_concepts;
    for (std::size_t t = 0; t < pools.topics.size(); ++t) {
        all_concepts.push_back(pools.topics[t]);
        for (const std::string& alias : pools.aliases[t]) all_concepts.push_back(alias);
    }
    for (std::size_t j = 0; j < cfg.junk_words; ++j) all_concepts.push_back(junk_word(j));
    for (std::size_t h = 0; h < cfg.junk_hubs; ++h) all_concepts.push_back(junk_hub_word(h));

    for (std::size_t t = 0; t < pools.topics.size(); ++t)
        for (const std::string& alias : pools.aliases[t])
            b.add_triple_surfaces(alias, "RelatedTo", pools.topics[t]);
    for (std::size_t j = 0; j < cfg.junk_words; ++j)
        for (std::size_t h = 0; h < cfg.junk_hubs; ++h)
            b.add_triple_surfaces(junk_word(j), "DerivedFrom", junk_hub_word(h));
    for (std::size_t h = 1; h < cfg.junk_hubs; ++h)
        b.add_triple_surfaces(junk_hub_word(h - 1), "RelatedTo", junk_hub_word(h));
    for (const std::string& surface : all_concepts)
        b.add_triple_surfaces(surface, "SelfLoop", surface);
    return b.build();
}

inline std::string make_pos_lexicon_tsv(const SyntheticConfig& cfg, const SyntheticPools& pools) {
    std::ostringstream out;
    for (std::size_t t = 0; t < pools.topics.size(); ++t) {
        out << pools.topics[t] << "\tnoun\n";
        for (const std::string& alias : pools.aliases[t]) out << alias << "\tnoun\n";
    }
    for (std::size_t j = 0; j < cfg.junk_words; ++j) out << junk_word(j) << "\tnoun\n";
    for (std::size_t h = 0; h < cfg.junk_hubs; ++h) out << junk_hub_word(h) << "\tnoun\n";
    for (std::size_t w = 0; w < cfg.words_per_polarity; ++w) {
        out << positive_word(w) << "\tadj\n";
        out << negative_word(w) << "\tadj\n";
    }
    return out.str();
}

inline std::string make_sentiment_lexicon_tsv(const SyntheticConfig& cfg) {
    std::ostringstream out;
    for (std::size_t w = 0; w < cfg.words_per_polarity; ++w) {
        out << positive_word(w) << "\tpos\n";
        out << negative_word(w) << "\tneg\n";
    }
    return out.str();
}

inline std::string pick(const std::vector<std::string>& pool, RngStream& rng) {
    return pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
}

/// A short sentence around `mention` carrying exactly two same-polarity
/// sentiment words (or none). The filler words are shared across every split
/// and the rating corpus.
inline std::string make_document(const std::string& mention, const std::string& s1,
                                 const std::string& s2, bool quoted, RngStream& rng) {
    if (s1.empty()) {
        switch (rng.uniform_int(3)) {
            case 0: return "i saw the " + mention + " today";
            case 1: return "the " + mention + " is a thing i heard about";
            default: return "people talk about the " + mention + " sometimes";
        }
    }
    if (quoted)
        return "they said \" the " + mention + " is " + s1 + " and " + s2 + " \" today";
    switch (rng.uniform_int(3)) {
        case 0: return "i think the " + mention + " is " + s1 + " and " + s2;
        case 1: return "the " + mention + " seems " + s1 + " and really " + s2;
        default: return "honestly the " + mention + " is " + s2 + " and " + s1;
    }
}

struct RowPlan {
    std::size_t topic = 0; // index into pools.topics
    bool linked = false;
    int intended = 0;
    bool sarcastic = false;
};

struct SuiteBuilder {
    const SyntheticConfig& cfg;
    const SyntheticPools& pools;
    SyntheticSuite& suite;
    std::array<std::size_t, 3> split_counter{};

    bool is_zero_shot_topic(std::size_t t) const { return t >= cfg.few_shot_topics; }

    /// Linked rows rotate their mention between the topic's aliases and the
    /// topic word itself, so implicit and explicit mentions both occur.
    std::string linked_mention(std::size_t topic, std::size_t i) const {
        const std::size_t forms = cfg.aliases_per_topic + 1;
        const std::size_t r = i % forms;
        return r < cfg.aliases_per_topic ? pools.aliases[topic][r] : pools.topics[topic];
    }

    void add_row(Split split, const RowPlan& plan, const std::string& mention, RngStream& rng) {
        std::string s1, s2;
        if (plan.intended != 0) {
            // Sarcastic rows word the opposite polarity on the surface while
            // the gold label follows the intended polarity.
            const bool surface_positive = plan.sarcastic ? plan.intended < 0 : plan.intended > 0;
            const auto& pool = pools.sentiment(split, surface_positive);
            s1 = pick(pool, rng);
            do {
                s2 = pick(pool, rng);
            } while (pool.size() > 1 && s2 == s1);
        }
        const bool quoted = plan.intended != 0 && rng.uniform() < cfg.quote_fraction;
        add_row_with_document(split, plan, make_document(mention, s1, s2, quoted, rng), quoted);
    }

    void add_row_with_document(Split split, const RowPlan& plan, const std::string& document,
                               bool quoted) {
        StanceExample ex;
        char id[32];
        std::snprintf(id, sizeof id, "%s-%04zu", to_string(split),
                      ++split_counter[static_cast<std::size_t>(split)]);
        ex.id = id;
        ex.document = document;
        ex.topic = pools.topics[plan.topic];
        ex.gold = plan.intended > 0 && plan.linked   ? StanceLabel::Pro
                  : plan.intended < 0 && plan.linked ? StanceLabel::Con
                                                     : StanceLabel::Neu;
        ex.split = split;
        ex.shot = split == Split::train ? Shot::not_applicable
                  : is_zero_shot_topic(plan.topic) ? Shot::zero
                                                   : Shot::few;
        const auto tokens = word_tokenize(document);
        const bool topic_mentioned =
            std::find(tokens.begin(), tokens.end(), ex.topic) != tokens.end();
        ex.phenomena[static_cast<std::size_t>(Phenomenon::implicit_topic)] = !topic_mentioned;
        ex.phenomena[static_cast<std::size_t>(Phenomenon::quotation)] = quoted;
        ex.phenomena[static_cast<std::size_t>(Phenomenon::sarcasm)] = plan.sarcastic;
        suite.examples.push_back(std::move(ex));
        suite.provenance.push_back({plan.linked, plan.intended, plan.sarcastic});
    }

    void add_topic_rows(Split split, std::size_t topic, const SyntheticCounts& counts,
                        RngStream& rng) {
        for (std::size_t i = 0; i < counts.pro; ++i)
            add_row(split, {topic, true, +1, false}, linked_mention(topic, i), rng);
        for (std::size_t i = 0; i < counts.con; ++i)
            add_row(split, {topic, true, -1, false}, linked_mention(topic, i + 1), rng);
        for (std::size_t i = 0; i < counts.neu_unlinked; ++i)
            add_row(split, {topic, false, i % 2 == 0 ? +1 : -1, false},
                    pick(pools.junk(split), rng), rng);
        for (std::size_t i = 0; i < counts.neu_plain; ++i) {
            const bool linked = i % 2 == 0;
            add_row(split, {topic, linked, 0, false},
                    linked ? linked_mention(topic, i) : pick(pools.junk(split), rng), rng);
        }
    }

    /// One document, two topics: linked (and sentiment-bearing) for the first,
    /// off-topic for the second, so the pair carries different gold labels.
    void add_paired_rows(Split split, RngStream& rng) {
        for (std::size_t k = 0; k < cfg.paired_docs_per_split; ++k) {
            std::size_t lo = 0, n = cfg.few_shot_topics;
            if (split != Split::train && k % 2 == 1) {
                lo = cfg.few_shot_topics;
                n = cfg.zero_shot_topics;
            }
            if (n < 2) { lo = 0; n = cfg.few_shot_topics + (split == Split::train ? 0 : cfg.zero_shot_topics); }
            if (n < 2) continue; // cannot pair distinct topics
            const std::size_t t1 = lo + k % n;
            const std::size_t t2 = lo + (k + 1) % n;
            const int intended = k % 2 == 0 ? +1 : -1;
            const auto& pool = pools.sentiment(split, intended > 0);
            const std::string s1 = pick(pool, rng);
            std::string s2;
            do {
                s2 = pick(pool, rng);
            } while (pool.size() > 1 && s2 == s1);
            const std::string doc =
                make_document(linked_mention(t1, k), s1, s2, false, rng);
            RowPlan first{t1, true, intended, false};
            RowPlan second{t2, false, intended, false};
            add_row_with_document(split, first, doc, false);
            add_row_with_document(split, second, doc, false);
            for (std::size_t back = suite.examples.size() - 2; back < suite.examples.size();
                 ++back) {
                auto& flags = suite.examples[back].phenomena;
                flags[static_cast<std::size_t>(Phenomenon::multi_topic_document)] = true;
                flags[static_cast<std::size_t>(Phenomenon::multi_label_document)] = true;
            }
        }
    }

    void add_sarcasm_rows(std::size_t base_test_rows, RngStream& rng) {
        const auto n = static_cast<std::size_t>(
            std::llround(cfg.sarcasm_fraction * static_cast<double>(base_test_rows)));
        const std::size_t topics = pools.topics.size();
        for (std::size_t i = 0; i < n; ++i) {
            const RowPlan plan{i % topics, true, i % 2 == 0 ? -1 : +1, true};
            add_row(Split::test, plan, linked_mention(plan.topic, i), rng);
        }
    }
};

inline std::vector<text::RatedDocument> make_sentiment_corpus(const SyntheticConfig& cfg,
                                                              RngStream& rng) {
    // The rating corpus uses the full lexicon (both halves), so the sentiment
    // encoder learns the polarity of the words that later appear only in
    // dev/test stance documents.
    std::vector<std::string> pos_all, neg_all;
    for (std::size_t w = 0; w < cfg.words_per_polarity; ++w) {
        pos_all.push_back(detail::positive_word(w));
        neg_all.push_back(detail::negative_word(w));
    }
    const int top = static_cast<int>(cfg.rating_classes);
    const int mid = (top + 1) / 2;
    std::vector<text::RatedDocument> corpus;
    corpus.reserve(cfg.sentiment_docs);
    for (std::size_t i = 0; i < cfg.sentiment_docs; ++i) {
        text::RatedDocument doc;
        // Cycle through the lexicon for the first word so every word is
        // guaranteed corpus coverage; draw the second word at random.
        switch (i % 5) {
            case 0:
                doc.text = "i think the product is " + pos_all[i % pos_all.size()] + " and " +
                           pick(pos_all, rng);
                doc.rating = top;
                break;
            case 1:
                doc.text = "the product seems " + pos_all[(i / 5) % pos_all.size()] + " to me";
                doc.rating = std::min(top, mid + 1);
                break;
            case 2:
                doc.text = "the product is a thing i heard about";
                doc.rating = mid;
                break;
            case 3:
                doc.text = "the product seems " + neg_all[(i / 5) % neg_all.size()] + " to me";
                doc.rating = std::max(1, mid - 1);
                break;
            default:
                doc.text = "i think the product is " + neg_all[i % neg_all.size()] + " and " +
                           pick(neg_all, rng);
                doc.rating = 1;
                break;
        }
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

} // namespace detail

/// Builds the full benchmark: knowledge graph, POS and sentiment lexicons,
/// rated sentiment-pretraining corpus, and the stance dataset. Gold labels
/// follow one rule: Pro when the document's intended wording is positive AND
/// it mentions the topic or one of the topic's graph-linked aliases, Con
/// when negative AND linked, Neu otherwise. Dev/test rows use sentiment and
/// off-topic words absent from training rows, zero-shot topics never appear
/// in training rows, and a small share of test rows is worded with the
/// opposite-polarity lexicon (flagged Sarc). Identical config and stream
/// produce identical suites.
inline SyntheticSuite generate_synthetic_suite(const SyntheticConfig& cfg, const RngStream& rng) {
    detail::validate_synthetic(cfg);
    const detail::SyntheticPools pools = detail::make_pools(cfg);

    SyntheticSuite suite;
    suite.graph = detail::make_graph(cfg, pools);
    suite.pos_lexicon_tsv = detail::make_pos_lexicon_tsv(cfg, pools);
    suite.sentiment_lexicon_tsv = detail::make_sentiment_lexicon_tsv(cfg);
    {
        std::istringstream in(suite.pos_lexicon_tsv);
        suite.pos = kg::PosLexicon::parse(in);
    }
    {
        std::istringstream in(suite.sentiment_lexicon_tsv);
        suite.lexicon = text::SentimentLexicon::parse(in);
    }
    RngStream corpus_rng = rng.derive("corpus");
    suite.sentiment_corpus = detail::make_sentiment_corpus(cfg, corpus_rng);

    detail::SuiteBuilder builder{cfg, pools, suite, {}};
    {
        RngStream split_rng = rng.derive("train");
        for (std::size_t t = 0; t < cfg.few_shot_topics; ++t) {
            RngStream topic_rng = split_rng.derive(t);
            builder.add_topic_rows(Split::train, t, cfg.train_counts, topic_rng);
        }
        RngStream paired_rng = split_rng.derive("paired");
        builder.add_paired_rows(Split::train, paired_rng);
    }
    for (Split split : {Split::dev, Split::test}) {
        RngStream split_rng = rng.derive(to_string(split));
        for (std::size_t t = 0; t < pools.topics.size(); ++t) {
            RngStream topic_rng = split_rng.derive(t);
            builder.add_topic_rows(split, t, cfg.eval_counts, topic_rng);
        }
        RngStream paired_rng = split_rng.derive("paired");
        builder.add_paired_rows(split, paired_rng);
    }
    {
        const std::size_t base_test_rows =
            pools.topics.size() * cfg.eval_counts.total() + 2 * cfg.paired_docs_per_split;
        RngStream sarcasm_rng = rng.derive("sarcasm");
        builder.add_sarcasm_rows(base_test_rows, sarcasm_rng);
    }
    return suite;
}

// ---------------------------------------------------------------------------
// Rated-corpus serialization (TSV `text<TAB>rating`)
// ---------------------------------------------------------------------------

inline std::string rated_corpus_tsv(const std::vector<text::RatedDocument>& corpus) {
    std::ostringstream out;
    for (const auto& doc : corpus) out << doc.text << '\t' << doc.rating << '\n';
    return out.str();
}

inline std::vector<text::RatedDocument> parse_rated_corpus(std::istream& in) {
    std::vector<text::RatedDocument> corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto parts = split(line, '\t');
        if (parts.size() != 2 || parts[0].empty())
            fail("evalkit", "bad rated-corpus row at line " + std::to_string(line_no));
        corpus.push_back({parts[0], static_cast<int>(parse_int(parts[1], "evalkit"))});
    }
    return corpus;
}

inline std::vector<text::RatedDocument> load_rated_corpus(const std::string& path) {
    std::istringstream in(read_text_file(path, "evalkit"));
    return parse_rated_corpus(in);
}

// ---------------------------------------------------------------------------
// Training configurations sized for the generated benchmark
// ---------------------------------------------------------------------------

inline text::SentimentPretrainConfig synthetic_sentiment_config() {
    text::SentimentPretrainConfig cfg;
    cfg.encoder.d_model = 32;
    cfg.encoder.n_blocks = 2;
    cfg.encoder.n_heads = 4;
    cfg.encoder.d_ff = 64;
    cfg.encoder.max_len = 24;
    cfg.epochs = 200;
    cfg.lr = 1e-3;
    cfg.rating_classes = 5;
    return cfg;
}

inline kgae::PretrainConfig synthetic_kg_config() {
    kgae::PretrainConfig cfg;
    cfg.feature_dim = 16;
    cfg.epochs = 150;
    cfg.lr = Real(1e-2);
    cfg.edge_keep_prob = Real(0.8);
    cfg.holdout_fraction = 0; // train on every edge; ablations already thin the graph
    return cfg;
}

inline stance::StanceConfig synthetic_stance_config() {
    stance::StanceConfig cfg;
    cfg.context.d_model = 32;
    cfg.context.n_blocks = 2;
    cfg.context.n_heads = 4;
    cfg.context.d_ff = 64;
    cfg.context.max_len = 32;
    cfg.sentiment = synthetic_sentiment_config().encoder;
    cfg.lambda = Real(1);
    cfg.lr = stance::kFromScratchLearningRate;
    cfg.batch_size = 8;
    cfg.epochs = 40;
    return cfg;
}

} // namespace stancekit::evalkit

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "stancekit/evalkit.hpp"

using namespace stancekit;
using namespace stancekit::evalkit;
using stance::StanceLabel;

namespace {

text::SentimentLexicon two_word_lexicon() {
    std::istringstream in("good\tpos\nbad\tneg\n");
    return text::SentimentLexicon::parse(in);
}

std::vector<StanceLabel> labels(std::initializer_list<StanceLabel> values) { return values; }

/// Independent per-class F1 for cross-checking subset reports.
double reference_macro_f1(const std::vector<StanceLabel>& preds,
                          const std::vector<StanceLabel>& golds) {
    double sum = 0;
    for (std::size_t c = 0; c < stance::kLabelCount; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const bool p = stance::label_index(preds[i]) == c;
            const bool g = stance::label_index(golds[i]) == c;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0;
        const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0;
        sum += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
    }
    return sum / static_cast<double>(stance::kLabelCount);
}

std::multiset<std::tuple<std::string, std::string, std::string>> surface_triples(
    const kg::KnowledgeGraph& g) {
    std::multiset<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& t : g.triples())
        out.insert({g.concept_surface(t.head), g.relation_name(t.rel), g.concept_surface(t.tail)});
    return out;
}

/// Small world + short trainings so pipeline-level properties run in seconds.
SyntheticConfig tiny_config() {
    SyntheticConfig cfg;
    cfg.few_shot_topics = 2;
    cfg.zero_shot_topics = 1;
    cfg.aliases_per_topic = 1;
    cfg.junk_words = 2;
    cfg.junk_hubs = 1;
    cfg.words_per_polarity = 2;
    cfg.train_counts = {2, 2, 1, 1};
    cfg.eval_counts = {1, 1, 1, 0};
    cfg.paired_docs_per_split = 0;
    cfg.sarcasm_fraction = 0;
    cfg.quote_fraction = 0;
    cfg.sentiment_docs = 10;
    cfg.rating_classes = 3;
    return cfg;
}

struct TinyWorld {
    SyntheticSuite suite;
    std::vector<StanceExample> train, dev, test;
    text::Vocabulary sentiment_vocab;
    ParamStore sentiment;

    PipelineConfig pipeline() const {
        PipelineConfig pipe;
        pipe.kg_pretrain.feature_dim = 4;
        pipe.kg_pretrain.epochs = 3;
        pipe.kg_pretrain.lr = Real(1e-2);
        pipe.kg_pretrain.holdout_fraction = 0;
        pipe.stance_cfg.context.d_model = 8;
        pipe.stance_cfg.context.n_blocks = 1;
        pipe.stance_cfg.context.n_heads = 2;
        pipe.stance_cfg.context.d_ff = 16;
        pipe.stance_cfg.context.max_len = 16;
        pipe.stance_cfg.sentiment = sentiment_encoder_config();
        pipe.stance_cfg.epochs = 2;
        pipe.stance_cfg.batch_size = 4;
        pipe.pos = &suite.pos;
        pipe.sentiment = &sentiment;
        pipe.sentiment_vocab = &sentiment_vocab;
        return pipe;
    }

    static text::EncoderConfig sentiment_encoder_config() {
        text::EncoderConfig enc;
        enc.d_model = 8;
        enc.n_blocks = 1;
        enc.n_heads = 2;
        enc.d_ff = 16;
        enc.max_len = 16;
        return enc;
    }
};

const TinyWorld& tiny_world() {
    static const TinyWorld world = [] {
        TinyWorld w;
        RngStream rng(7);
        w.suite = generate_synthetic_suite(tiny_config(), rng.derive("suite"));
        w.train = filter_split(w.suite.examples, Split::train);
        w.dev = filter_split(w.suite.examples, Split::dev);
        w.test = filter_split(w.suite.examples, Split::test);
        std::vector<std::string> texts;
        for (const auto& doc : w.suite.sentiment_corpus) texts.push_back(doc.text);
        w.sentiment_vocab = text::Vocabulary::build(texts);
        text::SentimentPretrainConfig cfg;
        cfg.encoder = TinyWorld::sentiment_encoder_config();
        cfg.epochs = 3;
        cfg.rating_classes = 3;
        RngStream sent_rng = rng.derive("sentiment");
        w.sentiment = text::pretrain_sentiment(w.suite.sentiment_corpus, w.sentiment_vocab,
                                               w.suite.lexicon, cfg, sent_rng);
        return w;
    }();
    return world;
}

} // namespace

TEST_CASE("split, shot, and phenomenon names round-trip", "[evalkit]") {
    for (Split s : {Split::train, Split::dev, Split::test})
        REQUIRE(split_from_string(to_string(s)) == s);
    REQUIRE(split_from_string("  VAL ") == Split::dev);
    REQUIRE(split_from_string("Validation") == Split::dev);
    REQUIRE(split_from_string("TRAIN") == Split::train);
    REQUIRE_THROWS_AS(split_from_string("holdout"), Error);

    REQUIRE(std::string(to_string(Shot::zero)) == "zero");
    REQUIRE(std::string(to_string(Shot::few)) == "few");
    REQUIRE(std::string(to_string(Shot::not_applicable)) == "n/a");

    const char* expected[kPhenomenonCount] = {"Imp", "mlT", "mlS", "Qte", "Sarc"};
    for (std::size_t p = 0; p < kPhenomenonCount; ++p)
        REQUIRE(std::string(phenomenon_name(p)) == expected[p]);
    REQUIRE_THROWS_AS(phenomenon_name(kPhenomenonCount), Error);
}

TEST_CASE("dataset parsing applies column and label maps", "[evalkit]") {
    SECTION("defaults: textual labels, synthesized ids, train split") {
        std::istringstream in(
            "document,topic,label\n"
            "i support this,taxes,pro\n"
            "terrible idea,taxes,con\n"
            "unrelated post,taxes,neutral\n"
            "also unrelated,taxes,NEU\n");
        const auto rows = parse_dataset(in, DatasetSpec{});
        REQUIRE(rows.size() == 4);
        REQUIRE(rows[0].id == "row1");
        REQUIRE(rows[3].id == "row4");
        REQUIRE(rows[0].gold == StanceLabel::Pro);
        REQUIRE(rows[1].gold == StanceLabel::Con);
        REQUIRE(rows[2].gold == StanceLabel::Neu);
        REQUIRE(rows[3].gold == StanceLabel::Neu); // label matching is case-insensitive
        for (const auto& r : rows) {
            REQUIRE(r.split == Split::train);
            REQUIRE(r.shot == Shot::not_applicable);
            REQUIRE(r.phenomena == PhenomenaFlags{});
        }
    }

    SECTION("quoted documents keep commas, quotes, and newlines") {
        std::istringstream in(
            "document,topic,label\r\n"
            "\"hello, \"\"world\"\"\nsecond line\",taxes,pro\r\n"
            "plain,taxes,con\r\n");
        const auto rows = parse_dataset(in, DatasetSpec{});
        REQUIRE(rows.size() == 2);
        REQUIRE(rows[0].document == "hello, \"world\"\nsecond line");
        REQUIRE(rows[1].document == "plain");
    }

    SECTION("blank lines are skipped") {
        std::istringstream in("document,topic,label\n\na,t,pro\n\n\nb,t,con\n\n");
        REQUIRE(parse_dataset(in, DatasetSpec{}).size() == 2);
    }

    SECTION("declared id, split, and shot columns") {
        DatasetSpec spec;
        spec.columns.id = "post_id";
        spec.columns.split = "fold";
        spec.columns.shot = "seen";
        std::istringstream in(
            "post_id,document,topic,label,fold,seen\n"
            "a1,doc one,taxes,pro,train,zero\n" // train rows ignore the shot cell
            "a2,doc two,taxes,con,dev,few\n"
            "a3,doc three,taxes,neu,Validation,zero\n"
            "a4,doc four,taxes,neu,test,\n");
        const auto rows = parse_dataset(in, spec);
        REQUIRE(rows[0].id == "a1");
        REQUIRE(rows[0].split == Split::train);
        REQUIRE(rows[0].shot == Shot::not_applicable);
        REQUIRE(rows[1].split == Split::dev);
        REQUIRE(rows[1].shot == Shot::few);
        REQUIRE(rows[2].split == Split::dev);
        REQUIRE(rows[2].shot == Shot::zero);
        REQUIRE(rows[3].split == Split::test);
        REQUIRE(rows[3].shot == Shot::not_applicable); // empty cell = untagged
    }

    SECTION("custom shot vocabulary and default split") {
        DatasetSpec spec;
        spec.columns.shot = "seen";
        spec.columns.default_split = Split::test;
        spec.columns.shot_few = "seen";
        spec.columns.shot_zero = "unseen";
        std::istringstream in("document,topic,label,seen\na,t,pro,unseen\nb,t,con,seen\n");
        const auto rows = parse_dataset(in, spec);
        REQUIRE(rows[0].split == Split::test);
        REQUIRE(rows[0].shot == Shot::zero);
        REQUIRE(rows[1].shot == Shot::few);
    }

    SECTION("numeric label codings must be declared") {
        std::istringstream numeric("document,topic,label\na,t,1\n");
        REQUIRE_THROWS_WITH(parse_dataset(numeric, DatasetSpec{}),
                            Catch::Matchers::ContainsSubstring("unknown label '1'") &&
                                Catch::Matchers::ContainsSubstring("line 2"));

        DatasetSpec spec;
        spec.labels = LabelMap::numeric("1", "0", "2");
        std::istringstream declared("document,topic,label\na,t,1\nb,t,0\nc,t,2\n");
        const auto rows = parse_dataset(declared, spec);
        REQUIRE(rows[0].gold == StanceLabel::Pro);
        REQUIRE(rows[1].gold == StanceLabel::Con);
        REQUIRE(rows[2].gold == StanceLabel::Neu);
    }

    SECTION("phenomenon flag columns") {
        DatasetSpec spec;
        spec.columns.phenomena[static_cast<std::size_t>(Phenomenon::sarcasm)] = "Sarc";
        spec.columns.phenomena[static_cast<std::size_t>(Phenomenon::quotation)] = "Qte";
        std::istringstream in(
            "document,topic,label,Sarc,Qte\n"
            "a,t,pro,1,no\n"
            "b,t,con,FALSE,y\n"
            "c,t,neu,,yes\n");
        const auto rows = parse_dataset(in, spec);
        REQUIRE(rows[0].phenomena[static_cast<std::size_t>(Phenomenon::sarcasm)]);
        REQUIRE_FALSE(rows[0].phenomena[static_cast<std::size_t>(Phenomenon::quotation)]);
        REQUIRE_FALSE(rows[1].phenomena[static_cast<std::size_t>(Phenomenon::sarcasm)]);
        REQUIRE(rows[1].phenomena[static_cast<std::size_t>(Phenomenon::quotation)]);
        REQUIRE_FALSE(rows[2].phenomena[static_cast<std::size_t>(Phenomenon::sarcasm)]);
        REQUIRE(rows[2].phenomena[static_cast<std::size_t>(Phenomenon::quotation)]);

        std::istringstream bad("document,topic,label,Sarc,Qte\na,t,pro,maybe,1\n");
        REQUIRE_THROWS_WITH(parse_dataset(bad, spec),
                            Catch::Matchers::ContainsSubstring("unreadable flag 'maybe'") &&
                                Catch::Matchers::ContainsSubstring("'Sarc'"));
    }

    SECTION("errors name the offending line") {
        std::istringstream missing_col("document,label\na,pro\n");
        REQUIRE_THROWS_WITH(parse_dataset(missing_col, DatasetSpec{}),
                            Catch::Matchers::ContainsSubstring("missing required column 'topic'"));

        DatasetSpec declared_absent;
        declared_absent.columns.shot = "seen";
        std::istringstream no_shot("document,topic,label\na,t,pro\n");
        REQUIRE_THROWS_WITH(parse_dataset(no_shot, declared_absent),
                            Catch::Matchers::ContainsSubstring("missing required column 'seen'"));

        std::istringstream short_row("document,topic,label\na,t,pro\nb,t\n");
        REQUIRE_THROWS_WITH(parse_dataset(short_row, DatasetSpec{}),
                            Catch::Matchers::ContainsSubstring("line 3") &&
                                Catch::Matchers::ContainsSubstring("2 fields, expected 3"));

        std::istringstream empty_doc("document,topic,label\n ,t,pro\n");
        REQUIRE_THROWS_WITH(parse_dataset(empty_doc, DatasetSpec{}),
                            Catch::Matchers::ContainsSubstring("'document' at line 2"));

        std::istringstream empty_label("document,topic,label\na,t,\n");
        REQUIRE_THROWS_WITH(parse_dataset(empty_label, DatasetSpec{}),
                            Catch::Matchers::ContainsSubstring("'label' at line 2"));

        DatasetSpec with_split;
        with_split.columns.split = "split";
        std::istringstream bad_split("document,topic,label,split\na,t,pro,holdout\n");
        REQUIRE_THROWS_WITH(parse_dataset(bad_split, with_split),
                            Catch::Matchers::ContainsSubstring("unknown split 'holdout'"));

        DatasetSpec with_shot;
        with_shot.columns.split = "split";
        with_shot.columns.shot = "shot";
        std::istringstream bad_shot("document,topic,label,split,shot\na,t,pro,dev,half\n");
        REQUIRE_THROWS_WITH(parse_dataset(bad_shot, with_shot),
                            Catch::Matchers::ContainsSubstring("unknown shot value 'half'"));

        std::istringstream unterminated("document,topic,label\n\"a,t,pro\n");
        REQUIRE_THROWS_AS(parse_dataset(unterminated, DatasetSpec{}), Error);

        std::istringstream empty;
        REQUIRE_THROWS_AS(parse_dataset(empty, DatasetSpec{}), Error);
    }

    SECTION("multi-line quoted fields keep later line numbers accurate") {
        // The quoted document spans three physical lines, so the bad row after
        // it starts on line 5.
        std::istringstream in(
            "document,topic,label\n"
            "\"line a\nline b\nline c\",t,pro\n"
            "oops,t,what\n");
        REQUIRE_THROWS_WITH(parse_dataset(in, DatasetSpec{}),
                            Catch::Matchers::ContainsSubstring("unknown label 'what'") &&
                                Catch::Matchers::ContainsSubstring("line 5"));
    }
}

TEST_CASE("dataset serialization round-trips through the synthetic schema", "[evalkit]") {
    std::vector<StanceExample> examples;
    StanceExample a;
    a.id = "t-1";
    a.document = "a doc with, commas and \"quotes\"\nand a newline";
    a.topic = "taxes";
    a.gold = StanceLabel::Pro;
    a.split = Split::test;
    a.shot = Shot::zero;
    a.phenomena[static_cast<std::size_t>(Phenomenon::sarcasm)] = true;
    examples.push_back(a);
    StanceExample b;
    b.id = "t-2";
    b.document = "plain text";
    b.topic = "vaccines";
    b.gold = StanceLabel::Neu;
    b.split = Split::train;
    b.shot = Shot::not_applicable;
    examples.push_back(b);

    const std::string csv = dataset_csv(examples);
    std::istringstream in(csv);
    const auto parsed = parse_dataset(in, synthetic_dataset_spec());
    REQUIRE(parsed == examples);
}

TEST_CASE("macro-F1 reports break out shot subsets and phenomena", "[evalkit]") {
    SECTION("all-Pro predictions on one-each golds score one sixth") {
        const auto report =
            macro_f1(labels({StanceLabel::Pro, StanceLabel::Pro, StanceLabel::Pro}),
                     labels({StanceLabel::Pro, StanceLabel::Con, StanceLabel::Neu}));
        // Pro: precision 1/3, recall 1 -> F1 1/2; Con and Neu undefined -> 0.
        REQUIRE(std::abs(report.all.macro_f1 - 1.0 / 6.0) < 1e-12);
        REQUIRE_FALSE(report.zero_shot.has_value());
        REQUIRE_FALSE(report.few_shot.has_value());
    }

    SECTION("example-based report splits by shot tag") {
        std::vector<StanceExample> examples(5);
        std::vector<StanceLabel> preds;
        const StanceLabel golds[5] = {StanceLabel::Pro, StanceLabel::Con, StanceLabel::Neu,
                                      StanceLabel::Pro, StanceLabel::Con};
        const Shot shots[5] = {Shot::zero, Shot::zero, Shot::few, Shot::few, Shot::not_applicable};
        for (std::size_t i = 0; i < 5; ++i) {
            examples[i].gold = golds[i];
            examples[i].shot = shots[i];
            examples[i].split = Split::test;
            preds.push_back(i == 1 ? StanceLabel::Pro : golds[i]); // one zero-shot mistake
        }
        const auto report = macro_f1(preds, examples);
        REQUIRE(report.zero_shot.has_value());
        REQUIRE(report.few_shot.has_value());

        // Subset summaries must equal direct evaluation of the subset rows.
        const auto direct_zero = stance::f1_summary(labels({StanceLabel::Pro, StanceLabel::Pro}),
                                                    labels({StanceLabel::Pro, StanceLabel::Con}));
        REQUIRE(report.zero_shot->macro_f1 == direct_zero.macro_f1);
        REQUIRE(report.zero_shot->confusion == direct_zero.confusion);
        // Both few-shot rows are correct, but Con never occurs in the subset
        // and an absent class contributes zero, so the macro average is 2/3.
        REQUIRE(std::abs(report.few_shot->macro_f1 - 2.0 / 3.0) < 1e-12);
        REQUIRE(report.all.macro_f1 ==
                stance::f1_summary(preds, labels({golds[0], golds[1], golds[2], golds[3],
                                                  golds[4]}))
                    .macro_f1);

        // Unflagged phenomena stay undefined rather than scoring zero.
        for (std::size_t p = 0; p < kPhenomenonCount; ++p)
            REQUIRE_FALSE(report.phenomenon_accuracy[p].has_value());
    }

    SECTION("zero- and few-shot confusion counts partition fully tagged data") {
        RngStream rng(11);
        std::vector<StanceExample> examples;
        std::vector<StanceLabel> preds;
        for (std::size_t i = 0; i < 200; ++i) {
            StanceExample ex;
            ex.gold = stance::label_from_index(static_cast<std::size_t>(rng.uniform_int(3)));
            ex.shot = rng.uniform() < 0.5 ? Shot::zero : Shot::few;
            ex.split = Split::test;
            examples.push_back(ex);
            preds.push_back(stance::label_from_index(static_cast<std::size_t>(rng.uniform_int(3))));
        }
        const auto report = macro_f1(preds, examples);
        REQUIRE(report.zero_shot.has_value());
        REQUIRE(report.few_shot.has_value());
        for (std::size_t g = 0; g < stance::kLabelCount; ++g)
            for (std::size_t p = 0; p < stance::kLabelCount; ++p)
                REQUIRE(report.zero_shot->confusion[g][p] + report.few_shot->confusion[g][p] ==
                        report.all.confusion[g][p]);

        std::vector<StanceLabel> golds;
        for (const auto& ex : examples) golds.push_back(ex.gold);
        REQUIRE(std::abs(report.all.macro_f1 - reference_macro_f1(preds, golds)) < 1e-12);
    }

    SECTION("length mismatches are rejected") {
        std::vector<StanceExample> examples(2);
        REQUIRE_THROWS_WITH(macro_f1(labels({StanceLabel::Pro}), examples),
                            Catch::Matchers::ContainsSubstring("differ in length"));
    }
}

TEST_CASE("phenomenon breakdown scores only flagged rows", "[evalkit]") {
    const auto preds = labels({StanceLabel::Pro, StanceLabel::Con, StanceLabel::Neu});
    const auto golds = labels({StanceLabel::Pro, StanceLabel::Pro, StanceLabel::Neu});
    std::vector<PhenomenaFlags> phenomena(3);
    const auto sarc = static_cast<std::size_t>(Phenomenon::sarcasm);
    const auto imp = static_cast<std::size_t>(Phenomenon::implicit_topic);
    phenomena[0][sarc] = true; // correct
    phenomena[1][sarc] = true; // wrong
    phenomena[2][imp] = true;  // correct

    const auto acc = breakdown_eval(preds, golds, phenomena);
    REQUIRE(acc[sarc].has_value());
    REQUIRE(*acc[sarc] == 0.5);
    REQUIRE(acc[imp].has_value());
    REQUIRE(*acc[imp] == 1.0);
    REQUIRE_FALSE(acc[static_cast<std::size_t>(Phenomenon::quotation)].has_value());

    REQUIRE_THROWS_WITH(breakdown_eval(preds, golds, std::vector<PhenomenaFlags>(2)),
                        Catch::Matchers::ContainsSubstring("differ in length"));
}

TEST_CASE("report JSON mirrors the report and uses null for undefined", "[evalkit]") {
    const auto report = macro_f1(labels({StanceLabel::Pro, StanceLabel::Pro, StanceLabel::Pro}),
                                 labels({StanceLabel::Pro, StanceLabel::Con, StanceLabel::Neu}));
    const nlohmann::json j = report_json(report);
    REQUIRE(std::abs(j.at("macro_f1").get<double>() - 1.0 / 6.0) < 1e-12);
    REQUIRE(j.at("shots").at("zero").is_null());
    REQUIRE(j.at("shots").at("few").is_null());
    REQUIRE(j.at("shots").at("all").at("confusion")[0][0].get<int>() == 1);
    REQUIRE(j.at("shots").at("all").at("per_class").at("pro").at("recall").get<double>() == 1.0);
    for (std::size_t p = 0; p < kPhenomenonCount; ++p)
        REQUIRE(j.at("phenomena").at(phenomenon_name(p)).is_null());
}

TEST_CASE("document sentiment takes the strict lexicon majority", "[evalkit]") {
    const auto lexicon = two_word_lexicon();
    REQUIRE(doc_sentiment("good good bad", lexicon) == DocSentiment::positive);
    REQUIRE(doc_sentiment("bad thing, bad outcome, one good part", lexicon) ==
            DocSentiment::negative);
    REQUIRE(doc_sentiment("good bad", lexicon) == DocSentiment::neutral);
    REQUIRE(doc_sentiment("nothing from the lexicon here", lexicon) == DocSentiment::neutral);
    REQUIRE(doc_sentiment("", lexicon) == DocSentiment::neutral);
    // Tokenization lowercases and strips punctuation.
    REQUIRE(doc_sentiment("GOOD! Good?", lexicon) == DocSentiment::positive);
    // Lexicon words inside other words do not count.
    REQUIRE(doc_sentiment("goodness badge", lexicon) == DocSentiment::neutral);
}

TEST_CASE("sentiment/stance matrix accumulates per-cell accuracy", "[evalkit]") {
    const auto lexicon = two_word_lexicon();
    const std::vector<std::string> docs = {
        "good good stuff",  // Pos row
        "good good stuff",  // Pos row
        "bad bad stuff",    // Neg row
        "no signal at all", // Neu row
    };
    const auto golds = labels({StanceLabel::Pro, StanceLabel::Pro, StanceLabel::Con,
                               StanceLabel::Neu});
    const auto preds = labels({StanceLabel::Pro, StanceLabel::Con, StanceLabel::Con,
                               StanceLabel::Neu});

    const auto m = sentiment_stance_matrix(preds, golds, docs, lexicon);
    REQUIRE(m.total[0][0] == 2); // (Pos, Pro)
    REQUIRE(m.correct[0][0] == 1);
    REQUIRE(m.accuracy(DocSentiment::positive, StanceLabel::Pro) == 0.5);
    REQUIRE(m.accuracy(DocSentiment::negative, StanceLabel::Con) == 1.0);
    REQUIRE(m.accuracy(DocSentiment::neutral, StanceLabel::Neu) == 1.0);
    REQUIRE_FALSE(m.accuracy(DocSentiment::negative, StanceLabel::Pro).has_value());

    const nlohmann::json j = matrix_json(m);
    REQUIRE(j.at("rows") == nlohmann::json({"Pos", "Neg", "Neu"}));
    REQUIRE(j.at("cols") == nlohmann::json({"Pro", "Con", "Neu"}));
    REQUIRE(j.at("accuracy")[0][0].get<double>() == 0.5);
    REQUIRE(j.at("accuracy")[1][0].is_null());
    REQUIRE(j.at("counts")[0][0].get<int>() == 2);

    REQUIRE_THROWS_WITH(sentiment_stance_matrix(preds, golds, {"one doc"}, lexicon),
                        Catch::Matchers::ContainsSubstring("differ in length"));
}

TEST_CASE("graph subsampling keeps induced structure", "[evalkit]") {
    const auto& world = tiny_world();
    const kg::KnowledgeGraph& graph = world.suite.graph;

    SECTION("concept mode keeps triples whose endpoints both survive") {
        RngStream rng(3);
        const auto sample = subsample_graph_concepts(graph, 50, rng);
        const auto expected_k = static_cast<std::size_t>(
            std::llround(0.5 * static_cast<double>(graph.concept_count())));
        REQUIRE(sample.concepts_kept == expected_k);
        REQUIRE(sample.graph.concept_count() == expected_k);
        REQUIRE(sample.graph.relations() == graph.relations());

        // Kept concepts form an order-preserving subset of the originals.
        const auto& kept = sample.graph.concepts();
        const auto& original = graph.concepts();
        auto it = original.begin();
        for (const auto& surface : kept) {
            it = std::find(it, original.end(), surface);
            REQUIRE(it != original.end());
            ++it;
        }

        // Brute-force induced filter over the original triples.
        const std::set<std::string> kept_set(kept.begin(), kept.end());
        std::multiset<std::tuple<std::string, std::string, std::string>> expected;
        for (const auto& t : graph.triples()) {
            const auto head = graph.concept_surface(t.head);
            const auto tail = graph.concept_surface(t.tail);
            if (kept_set.count(head) && kept_set.count(tail))
                expected.insert({head, graph.relation_name(t.rel), tail});
        }
        REQUIRE(surface_triples(sample.graph) == expected);
        REQUIRE(sample.triples_kept == expected.size());
    }

    SECTION("edge mode keeps every concept and exactly the sampled triples") {
        RngStream rng(4);
        const auto sample = subsample_graph_edges(graph, 40, rng);
        const auto expected_k = static_cast<std::size_t>(
            std::llround(0.4 * static_cast<double>(graph.triple_count())));
        REQUIRE(sample.concepts_kept == graph.concept_count());
        REQUIRE(sample.graph.concepts() == graph.concepts());
        REQUIRE(sample.triples_kept == expected_k);
        REQUIRE(sample.graph.triple_count() == expected_k);

        // Sampled triples are a sub-multiset of the originals.
        const auto all = surface_triples(graph);
        for (const auto& t : surface_triples(sample.graph)) REQUIRE(all.count(t) == 1);
    }

    SECTION("100 percent reproduces the graph and draws nothing") {
        RngStream rng(5);
        RngStream untouched(5);
        const auto sample = subsample_graph_concepts(graph, 100, rng);
        REQUIRE(sample.concepts_kept == graph.concept_count());
        REQUIRE(sample.triples_kept == graph.triple_count());
        REQUIRE(surface_triples(sample.graph) == surface_triples(graph));
        REQUIRE(sample.graph.concepts() == graph.concepts());
        // The stream was not consumed: both draws must match.
        REQUIRE(rng.uniform() == untouched.uniform());
    }

    SECTION("identical streams give identical samples") {
        RngStream a(9), b(9);
        const auto s1 = subsample_graph_concepts(graph, 30, a);
        const auto s2 = subsample_graph_concepts(graph, 30, b);
        REQUIRE(s1.graph.concepts() == s2.graph.concepts());
        REQUIRE(surface_triples(s1.graph) == surface_triples(s2.graph));
    }

    SECTION("percent bounds are enforced") {
        RngStream rng(1);
        REQUIRE_THROWS_WITH(subsample_graph_concepts(graph, 0, rng),
                            Catch::Matchers::ContainsSubstring("(0, 100]"));
        REQUIRE_THROWS_AS(subsample_graph_concepts(graph, -5, rng), Error);
        REQUIRE_THROWS_AS(subsample_graph_edges(graph, 100.5, rng), Error);
        REQUIRE_THROWS_AS(subsample_graph_edges(graph, std::nan(""), rng), Error);
    }
}

TEST_CASE("synthetic suite construction carries its ground truth", "[evalkit]") {
    RngStream rng(42);
    const SyntheticConfig cfg; // defaults: the benchmark the harness trains on
    const SyntheticSuite suite = generate_synthetic_suite(cfg, rng.derive("suite"));
    const auto train = filter_split(suite.examples, Split::train);
    const auto dev = filter_split(suite.examples, Split::dev);
    const auto test = filter_split(suite.examples, Split::test);
    const std::size_t all_topics = cfg.few_shot_topics + cfg.zero_shot_topics;

    SECTION("row counts follow the configuration") {
        REQUIRE(train.size() == cfg.few_shot_topics * cfg.train_counts.total() +
                                    2 * cfg.paired_docs_per_split);
        REQUIRE(dev.size() ==
                all_topics * cfg.eval_counts.total() + 2 * cfg.paired_docs_per_split);
        const std::size_t base_test =
            all_topics * cfg.eval_counts.total() + 2 * cfg.paired_docs_per_split;
        const auto sarcasm = static_cast<std::size_t>(
            std::llround(cfg.sarcasm_fraction * static_cast<double>(base_test)));
        REQUIRE(test.size() == base_test + sarcasm);
        REQUIRE(suite.provenance.size() == suite.examples.size());
        REQUIRE(suite.sentiment_corpus.size() == cfg.sentiment_docs);
    }

    SECTION("ids are unique and carry the split") {
        std::set<std::string> ids;
        for (const auto& ex : suite.examples) {
            REQUIRE(ids.insert(ex.id).second);
            REQUIRE(ex.id.rfind(to_string(ex.split), 0) == 0);
        }
    }

    SECTION("gold labels follow the wording/link rule, with linkage recomputed from the graph") {
        // Alias resolution read back from the graph, not from the generator.
        std::map<std::string, std::set<std::string>> mentions_of_topic;
        const auto rel_related = [&]() -> std::optional<kg::RelId> {
            const auto& rels = suite.graph.relations();
            for (std::size_t r = 0; r < rels.size(); ++r)
                if (rels[r] == "RelatedTo") return static_cast<kg::RelId>(r);
            return std::nullopt;
        }();
        REQUIRE(rel_related.has_value());
        for (const auto& t : suite.graph.triples()) {
            if (t.rel != *rel_related) continue;
            const auto head = suite.graph.concept_surface(t.head);
            const auto tail = suite.graph.concept_surface(t.tail);
            if (tail.rfind("topic", 0) == 0) mentions_of_topic[tail].insert(head);
        }
        for (auto& [topic, mentions] : mentions_of_topic) mentions.insert(topic);

        for (std::size_t i = 0; i < suite.examples.size(); ++i) {
            const auto& ex = suite.examples[i];
            const auto& prov = suite.provenance[i];
            const auto tokens = word_tokenize(ex.document);
            const auto& mentions = mentions_of_topic.at(ex.topic);
            const bool linked = std::any_of(tokens.begin(), tokens.end(), [&](const auto& tok) {
                return mentions.count(tok) != 0;
            });
            REQUIRE(linked == prov.linked);
            const StanceLabel expected = prov.intended > 0 && linked   ? StanceLabel::Pro
                                         : prov.intended < 0 && linked ? StanceLabel::Con
                                                                       : StanceLabel::Neu;
            REQUIRE(ex.gold == expected);
        }
    }

    SECTION("dev and test wording never leaks from the training rows") {
        std::set<std::string> train_tokens;
        for (const auto& ex : train)
            for (const auto& tok : word_tokenize(ex.document)) train_tokens.insert(tok);
        std::set<std::string> train_topics;
        for (const auto& ex : train) train_topics.insert(ex.topic);

        std::size_t eval_only_words = 0;
        for (const auto& ex : suite.examples) {
            if (ex.split == Split::train) continue;
            // Zero-shot rows name topics no training row used.
            if (ex.shot == Shot::zero) REQUIRE(train_topics.count(ex.topic) == 0);
            for (const auto& tok : word_tokenize(ex.document)) {
                const bool eval_half = suite.lexicon.lookup(tok).has_value() ||
                                       tok.rfind("gizmo", 0) == 0 || tok.rfind("topic", 0) == 0 ||
                                       tok.rfind("alias", 0) == 0;
                if (!eval_half) continue; // filler words are shared by design
                if (train_tokens.count(tok) == 0) ++eval_only_words;
            }
        }
        // The leakage split is only meaningful if eval rows actually use fresh
        // words; the gold-rule section above guarantees they are label-bearing.
        REQUIRE(eval_only_words > 0);

        // Eval-half sentiment and junk words never appear in training text.
        for (const auto& tok : train_tokens) {
            if (suite.lexicon.lookup(tok).has_value()) {
                const auto digits = tok.substr(4); // fineNN / grimNN
                REQUIRE(std::stoul(digits) < cfg.words_per_polarity / 2);
            }
            if (tok.rfind("gizmo", 0) == 0 && tok.rfind("gizmohub", 0) != 0)
                REQUIRE(std::stoul(tok.substr(5)) < cfg.junk_words / 2);
        }
    }

    SECTION("shot tags split eval rows by training-topic membership") {
        std::set<std::string> train_topics;
        for (const auto& ex : train) train_topics.insert(ex.topic);
        for (const auto& ex : suite.examples) {
            if (ex.split == Split::train) {
                REQUIRE(ex.shot == Shot::not_applicable);
            } else {
                REQUIRE(ex.shot == (train_topics.count(ex.topic) ? Shot::few : Shot::zero));
            }
        }
        // Both shot kinds are populated in dev and test.
        for (const auto* rows : {&dev, &test}) {
            REQUIRE(std::any_of(rows->begin(), rows->end(),
                                [](const auto& e) { return e.shot == Shot::zero; }));
            REQUIRE(std::any_of(rows->begin(), rows->end(),
                                [](const auto& e) { return e.shot == Shot::few; }));
        }
    }

    SECTION("phenomenon flags match the documents") {
        const auto imp = static_cast<std::size_t>(Phenomenon::implicit_topic);
        const auto qte = static_cast<std::size_t>(Phenomenon::quotation);
        const auto mlt = static_cast<std::size_t>(Phenomenon::multi_topic_document);
        const auto mls = static_cast<std::size_t>(Phenomenon::multi_label_document);
        const auto sarc = static_cast<std::size_t>(Phenomenon::sarcasm);
        std::array<std::size_t, kPhenomenonCount> flagged{};
        for (const auto& ex : suite.examples) {
            const auto tokens = word_tokenize(ex.document);
            const bool mentioned =
                std::find(tokens.begin(), tokens.end(), ex.topic) != tokens.end();
            REQUIRE(ex.phenomena[imp] == !mentioned);
            REQUIRE(ex.phenomena[qte] == (ex.document.find('"') != std::string::npos));
            REQUIRE(ex.phenomena[mlt] == ex.phenomena[mls]);
            if (ex.phenomena[sarc]) REQUIRE(ex.split == Split::test);
            for (std::size_t p = 0; p < kPhenomenonCount; ++p) flagged[p] += ex.phenomena[p];
        }
        for (std::size_t p = 0; p < kPhenomenonCount; ++p) REQUIRE(flagged[p] > 0);
    }

    SECTION("paired rows share a document but not a topic or label") {
        for (const auto* rows : {&train, &dev, &test}) {
            std::map<std::string, std::vector<const StanceExample*>> by_doc;
            for (const auto& ex : *rows)
                if (ex.phenomena[static_cast<std::size_t>(Phenomenon::multi_topic_document)])
                    by_doc[ex.document].push_back(&ex);
            REQUIRE(by_doc.size() == cfg.paired_docs_per_split);
            for (const auto& [doc, pair] : by_doc) {
                REQUIRE(pair.size() == 2);
                REQUIRE(pair[0]->topic != pair[1]->topic);
                REQUIRE(pair[0]->gold != pair[1]->gold);
                REQUIRE(pair[1]->gold == StanceLabel::Neu);
            }
        }
    }

    SECTION("sarcastic rows invert surface sentiment, defeating the lexicon") {
        std::size_t sarcastic = 0;
        for (std::size_t i = 0; i < suite.examples.size(); ++i) {
            const auto& ex = suite.examples[i];
            if (!suite.provenance[i].sarcastic) continue;
            ++sarcastic;
            const auto surface = doc_sentiment(ex.document, suite.lexicon);
            if (ex.gold == StanceLabel::Pro) REQUIRE(surface == DocSentiment::negative);
            if (ex.gold == StanceLabel::Con) REQUIRE(surface == DocSentiment::positive);
        }
        REQUIRE(sarcastic > 0);

        // A predictor that reads stance straight off the lexicon gets every
        // sarcastic row and every off-topic sentiment row wrong.
        std::vector<StanceLabel> lexicon_preds, golds;
        for (std::size_t i = 0; i < suite.examples.size(); ++i) {
            const auto& ex = suite.examples[i];
            if (ex.split != Split::test) continue;
            const auto s = doc_sentiment(ex.document, suite.lexicon);
            lexicon_preds.push_back(s == DocSentiment::positive   ? StanceLabel::Pro
                                    : s == DocSentiment::negative ? StanceLabel::Con
                                                                  : StanceLabel::Neu);
            golds.push_back(ex.gold);
            const auto& prov = suite.provenance[i];
            if (prov.sarcastic || (prov.intended != 0 && !prov.linked))
                REQUIRE(lexicon_preds.back() != ex.gold);
        }
        REQUIRE(stance::f1_summary(lexicon_preds, golds).macro_f1 < 1.0);
    }

    SECTION("non-sarcastic surface sentiment matches the intended wording") {
        for (std::size_t i = 0; i < suite.examples.size(); ++i) {
            const auto& prov = suite.provenance[i];
            if (prov.sarcastic) continue;
            const auto surface = doc_sentiment(suite.examples[i].document, suite.lexicon);
            const auto expected = prov.intended > 0   ? DocSentiment::positive
                                  : prov.intended < 0 ? DocSentiment::negative
                                                      : DocSentiment::neutral;
            REQUIRE(surface == expected);
        }
    }

    SECTION("lexicons round-trip and cover the generated words") {
        std::istringstream pos_in(suite.pos_lexicon_tsv);
        const auto pos = kg::PosLexicon::parse(pos_in);
        std::istringstream sent_in(suite.sentiment_lexicon_tsv);
        const auto lexicon = text::SentimentLexicon::parse(sent_in);
        REQUIRE(lexicon.words(text::Polarity::positive) ==
                suite.lexicon.words(text::Polarity::positive));
        REQUIRE(lexicon.words(text::Polarity::negative) ==
                suite.lexicon.words(text::Polarity::negative));
        REQUIRE(lexicon.words(text::Polarity::positive).size() == cfg.words_per_polarity);

        // Every document yields seed terms, so subgraph extraction never
        // starts from an empty set.
        for (const auto& ex : suite.examples)
            REQUIRE_FALSE(kg::extract_seed_terms({ex.document, ex.topic}, pos).empty());
    }

    SECTION("the graph links aliases to topics and mentions to hubs, plus self-loops") {
        const auto triples = surface_triples(suite.graph);
        REQUIRE(triples.count({"alias0a", "RelatedTo", "topic0"}) == 1);
        REQUIRE(triples.count({"gizmo0", "DerivedFrom", "gizmohub0"}) == 1);
        for (const auto& surface : suite.graph.concepts())
            REQUIRE(triples.count({surface, "SelfLoop", surface}) == 1);
        // Topics have no outgoing non-loop edges, so clusters stay separate.
        for (const auto& t : suite.graph.triples()) {
            const auto head = suite.graph.concept_surface(t.head);
            if (head.rfind("topic", 0) == 0)
                REQUIRE(suite.graph.relation_name(t.rel) == "SelfLoop");
        }
    }

    SECTION("dataset and corpus serializations round-trip") {
        std::istringstream csv_in(dataset_csv(suite.examples));
        REQUIRE(parse_dataset(csv_in, synthetic_dataset_spec()) == suite.examples);

        std::istringstream corpus_in(rated_corpus_tsv(suite.sentiment_corpus));
        const auto corpus = parse_rated_corpus(corpus_in);
        REQUIRE(corpus.size() == suite.sentiment_corpus.size());
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            REQUIRE(corpus[i].text == suite.sentiment_corpus[i].text);
            REQUIRE(corpus[i].rating == suite.sentiment_corpus[i].rating);
        }
    }

    SECTION("identical configuration and stream regenerate the identical suite") {
        RngStream rng2(42);
        const SyntheticSuite again = generate_synthetic_suite(cfg, rng2.derive("suite"));
        REQUIRE(again.examples == suite.examples);
        REQUIRE(surface_triples(again.graph) == surface_triples(suite.graph));
        REQUIRE(again.pos_lexicon_tsv == suite.pos_lexicon_tsv);
        REQUIRE(again.sentiment_lexicon_tsv == suite.sentiment_lexicon_tsv);
        REQUIRE(rated_corpus_tsv(again.sentiment_corpus) ==
                rated_corpus_tsv(suite.sentiment_corpus));
        for (std::size_t i = 0; i < suite.provenance.size(); ++i) {
            REQUIRE(again.provenance[i].linked == suite.provenance[i].linked);
            REQUIRE(again.provenance[i].intended == suite.provenance[i].intended);
            REQUIRE(again.provenance[i].sarcastic == suite.provenance[i].sarcastic);
        }
    }

    SECTION("invalid configurations are rejected") {
        SyntheticConfig bad = cfg;
        bad.zero_shot_topics = 0;
        REQUIRE_THROWS_AS(generate_synthetic_suite(bad, rng), Error);
        bad = cfg;
        bad.eval_counts.pro = 0;
        REQUIRE_THROWS_AS(generate_synthetic_suite(bad, rng), Error);
        bad = cfg;
        bad.sarcasm_fraction = 1.0;
        REQUIRE_THROWS_AS(generate_synthetic_suite(bad, rng), Error);
        bad = cfg;
        bad.rating_classes = 2;
        REQUIRE_THROWS_AS(generate_synthetic_suite(bad, rng), Error);
    }
}

TEST_CASE("rated corpus TSV rejects malformed rows", "[evalkit]") {
    std::istringstream ok("# comment\nsome text\t4\r\n\nmore text\t1\n");
    const auto corpus = parse_rated_corpus(ok);
    REQUIRE(corpus.size() == 2);
    REQUIRE(corpus[0].text == "some text");
    REQUIRE(corpus[0].rating == 4);

    std::istringstream missing_rating("text only\n");
    REQUIRE_THROWS_WITH(parse_rated_corpus(missing_rating),
                        Catch::Matchers::ContainsSubstring("line 1"));
    std::istringstream bad_rating("text\tlots\n");
    REQUIRE_THROWS_AS(parse_rated_corpus(bad_rating), Error);
}

TEST_CASE("pipeline runs and coverage points are deterministic", "[evalkit][pipeline]") {
    const auto& world = tiny_world();
    const PipelineConfig pipe = world.pipeline();
    RngStream rng(19);

    SECTION("identical streams give bitwise-identical results") {
        const auto a = run_stance_pipeline(world.suite.graph, world.train, world.dev, world.test,
                                           pipe, rng.derive("run"));
        const auto b = run_stance_pipeline(world.suite.graph, world.train, world.dev, world.test,
                                           pipe, rng.derive("run"));
        REQUIRE(report_json(a.test_report).dump() == report_json(b.test_report).dump());
        REQUIRE(a.stance.best_epoch == b.stance.best_epoch);
        REQUIRE(a.stance.best_dev_macro_f1 == b.stance.best_dev_macro_f1);
        REQUIRE(a.stance.history.size() == b.stance.history.size());
        for (std::size_t e = 0; e < a.stance.history.size(); ++e) {
            REQUIRE(a.stance.history[e].train_total == b.stance.history[e].train_total);
            REQUIRE(a.stance.history[e].dev_macro_f1 == b.stance.history[e].dev_macro_f1);
        }
        REQUIRE(a.kg_history.size() == b.kg_history.size());
        for (std::size_t e = 0; e < a.kg_history.size(); ++e)
            REQUIRE(a.kg_history[e].loss == b.kg_history[e].loss);
        REQUIRE(a.concept_features.size() == b.concept_features.size());
        for (std::size_t i = 0; i < a.concept_features.size(); ++i)
            REQUIRE(a.concept_features[i] == b.concept_features[i]);
        REQUIRE(a.test_predictions.size() == b.test_predictions.size());
        for (std::size_t i = 0; i < a.test_predictions.size(); ++i) {
            REQUIRE(a.test_predictions[i].id == b.test_predictions[i].id);
            REQUIRE(a.test_predictions[i].predicted == b.test_predictions[i].predicted);
            REQUIRE(a.test_predictions[i].probabilities == b.test_predictions[i].probabilities);
        }
    }

    SECTION("a 100 percent coverage point reproduces the direct pipeline run") {
        const auto points = coverage_ablation(world.suite.graph, {100.0}, world.train, world.dev,
                                              world.test, pipe, rng.derive("cov"));
        REQUIRE(points.size() == 1);
        REQUIRE(points[0].concepts_kept == world.suite.graph.concept_count());
        REQUIRE(points[0].triples_kept == world.suite.graph.triple_count());
        REQUIRE(points[0].zero_shot_macro_f1.has_value());
        const auto direct = run_stance_pipeline(
            world.suite.graph, world.train, world.dev, world.test, pipe,
            rng.derive("cov").derive(format_double(100.0)).derive("pipeline"));
        REQUIRE(direct.test_report.zero_shot.has_value());
        REQUIRE(*points[0].zero_shot_macro_f1 == direct.test_report.zero_shot->macro_f1);
    }

    SECTION("a subsample with no surviving triples is undefined and trains nothing") {
        kg::KnowledgeGraph::Builder b;
        const kg::RelId r = b.intern_relation("linked");
        const kg::NodeId x = b.intern_concept("x"), y = b.intern_concept("y"),
                         z = b.intern_concept("z");
        b.add_triple(x, r, y);
        b.add_triple(y, r, z);
        const auto chain = b.build(); // no self-loops: one kept concept -> no triples
        const auto points = coverage_ablation(chain, {34.0}, world.train, world.dev, world.test,
                                              pipe, rng.derive("chain"));
        REQUIRE(points.size() == 1);
        REQUIRE(points[0].concepts_kept == 1);
        REQUIRE(points[0].triples_kept == 0);
        REQUIRE_FALSE(points[0].zero_shot_macro_f1.has_value());
    }

    SECTION("coverage preconditions are enforced") {
        PipelineConfig no_kg = pipe;
        no_kg.variant = stance::ModelVariant::without_kg();
        REQUIRE_THROWS_WITH(coverage_ablation(world.suite.graph, {100.0}, world.train, world.dev,
                                              world.test, no_kg, rng),
                            Catch::Matchers::ContainsSubstring("knowledge branch"));
        REQUIRE_THROWS_WITH(coverage_ablation(world.suite.graph, {}, world.train, world.dev,
                                              world.test, pipe, rng),
                            Catch::Matchers::ContainsSubstring("at least one percent"));
        REQUIRE_THROWS_AS(coverage_ablation(world.suite.graph, {0.0}, world.train, world.dev,
                                            world.test, pipe, rng),
                          Error);

        // Test rows without zero-shot tags cannot anchor the coverage curve.
        std::vector<StanceExample> few_only;
        for (const auto& ex : world.test)
            if (ex.shot == Shot::few) few_only.push_back(ex);
        REQUIRE_FALSE(few_only.empty());
        REQUIRE_THROWS_WITH(coverage_ablation(world.suite.graph, {100.0}, world.train, world.dev,
                                              few_only, pipe, rng),
                            Catch::Matchers::ContainsSubstring("zero-shot"));
    }

    SECTION("the TSV curve writes one row per point with undefined gaps") {
        std::vector<CoveragePoint> points(3);
        points[0] = {10.0, 4, 0, std::nullopt};
        points[1] = {50.0, 22, 37, 0.5};
        points[2] = {100.0, 44, 89, 0.8125};
        std::ostringstream out;
        write_coverage_tsv(out, points);
        REQUIRE(out.str() ==
                "percent\tmacro_f1\n"
                "10\tundefined\n"
                "50\t0.5\n"
                "100\t0.8125\n");
    }
}

TEST_CASE("pipeline rejects an empty test split", "[evalkit][pipeline]") {
    const auto& world = tiny_world();
    RngStream rng(23);
    REQUIRE_THROWS_WITH(run_stance_pipeline(world.suite.graph, world.train, world.dev, {},
                                            world.pipeline(), rng),
                        Catch::Matchers::ContainsSubstring("test split"));
}

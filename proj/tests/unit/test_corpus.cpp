#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "common/text.hpp"
#include "corpus.hpp"
#include "support.hpp"

using namespace intentrag;
using testsupport::TempDir;

namespace {

LabelSet banking() { return LabelSet::load(testsupport::fixtures() / "banking77_labels.txt"); }

// 10,003 records spread unevenly over the 77 fixture labels.
std::filesystem::path write_train_file(const TempDir& dir, const LabelSet& labels) {
    std::string out;
    for (std::size_t i = 0; i < 10003; ++i) {
        auto c = (i * 31 + i / 7) % labels.size();
        out += nlohmann::json{{"text", "utterance " + std::to_string(i)}, {"label", labels.name(c)}}.dump() + "\n";
    }
    auto path = dir / "train.jsonl";
    write_file(path, out);
    return path;
}

Dataset synthetic(std::size_t classes, std::size_t per_class) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("class_" + std::to_string(c));
    Dataset ds{LabelSet(names), {}, Split::Train};
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            ds.items.push_back({"c" + std::to_string(c) + " item " + std::to_string(i), c, Origin::Original});
        }
    }
    return ds;
}

ExemplarSet generated_set(const LabelSet& labels, std::size_t per_class) {
    std::vector<LabeledUtterance> items;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            items.push_back({"generated " + std::to_string(c) + "/" + std::to_string(i), c, Origin::Generated});
        }
    }
    return group_by_class(labels, items);
}

}  // namespace

TEST(LoadDataset, TenThousandRecordFilePreservesCount) {
    TempDir dir;
    auto labels = banking();
    auto ds = load_dataset(write_train_file(dir, labels), DataFormat::Jsonl, labels);
    EXPECT_EQ(ds.items.size(), 10003u);
    EXPECT_EQ(ds.labels.size(), 77u);
    for (const auto& u : ds.items) EXPECT_LT(u.label, 77u);
}

TEST(LoadDataset, EmptyFileWithDeclaredLabels) {
    TempDir dir;
    write_file(dir / "empty.csv", "");
    auto ds = load_dataset(dir / "empty.csv", DataFormat::Csv, banking());
    EXPECT_TRUE(ds.items.empty());
    EXPECT_EQ(ds.labels.size(), 77u);
}

TEST(LoadDataset, LabelsResolveThroughCanonicalization) {
    TempDir dir;
    write_file(dir / "d.csv", "text,category\n\"My card got eaten, the ATM kept it\",Card Swallowed\n");
    auto labels = banking();
    auto ds = load_dataset(dir / "d.csv", DataFormat::Csv, labels);
    ASSERT_EQ(ds.items.size(), 1u);
    // Oracle: canonicalize both sides and search the declared names directly.
    auto names = labels.names();
    auto expected = std::find(names.begin(), names.end(), canonicalize("Card Swallowed")) - names.begin();
    EXPECT_EQ(ds.items[0].label, static_cast<std::size_t>(expected));
    EXPECT_EQ(ds.items[0].text, "My card got eaten, the ATM kept it");
}

TEST(LoadDataset, InfersSortedLabelsWhenNoneDeclared) {
    TempDir dir;
    write_file(dir / "d.jsonl", "{\"text\":\"a\",\"label\":\"Zeta\"}\n{\"text\":\"b\",\"label\":\"alpha\"}\n"
                                "{\"text\":\"c\",\"label\":\"zeta\"}\n");
    auto ds = load_dataset(dir / "d.jsonl", DataFormat::Jsonl);
    EXPECT_EQ(ds.labels.names(), (std::vector<std::string>{"alpha", "zeta"}));
    EXPECT_EQ(ds.items[2].label, 1u);
}

TEST(LoadDataset, RecordErrorsCarryRecordNumbers) {
    TempDir dir;
    auto labels = banking();
    write_file(dir / "u.csv", "text,label\nfine,card_arrival\nbad,topup_failed\n");
    try {
        load_dataset(dir / "u.csv", DataFormat::Csv, labels);
        FAIL() << "expected UnknownLabel";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnknownLabel);
        EXPECT_NE(std::string(e.what()).find("record #2"), std::string::npos) << e.what();
    }
    write_file(dir / "e.jsonl", "{\"text\":\"   \",\"label\":\"card_arrival\"}\n");
    EXPECT_ERRC(load_dataset(dir / "e.jsonl", DataFormat::Jsonl, labels), Errc::EmptyText);
    write_file(dir / "m.jsonl", "{\"text\":\"x\"}\n");
    EXPECT_ERRC(load_dataset(dir / "m.jsonl", DataFormat::Jsonl, labels), Errc::MalformedRecord);
    write_file(dir / "m.csv", "text,label\na,b,c\n");
    EXPECT_ERRC(load_dataset(dir / "m.csv", DataFormat::Csv, labels), Errc::MalformedRecord);
    write_file(dir / "h.csv", "words,label\na,card_arrival\n");
    EXPECT_ERRC(load_dataset(dir / "h.csv", DataFormat::Csv, labels), Errc::MalformedRecord);
}

TEST(LoadDataset, DuplicateTextsAreKept) {
    TempDir dir;
    write_file(dir / "d.jsonl", "{\"text\":\"same\",\"label\":\"a\"}\n{\"text\":\"same\",\"label\":\"a\"}\n");
    EXPECT_EQ(load_dataset(dir / "d.jsonl", DataFormat::Jsonl).items.size(), 2u);
}

TEST(SampleFewShot, ThreeShotOverBanking77Gives231) {
    TempDir dir;
    auto labels = banking();
    auto ds = load_dataset(write_train_file(dir, labels), DataFormat::Jsonl, labels);
    auto set = sample_few_shot(ds, {3, RandomSeeded{7}});
    EXPECT_EQ(set.size(), 231u);
    for (auto n : set.count_per_class()) EXPECT_EQ(n, 3u);
    // Grouped by class in label-index order.
    EXPECT_TRUE(std::is_sorted(set.exemplars.begin(), set.exemplars.end(),
                               [](const auto& a, const auto& b) { return a.label < b.label; }));
    // Every exemplar is a real dataset item of the same class.
    std::set<std::pair<std::string, std::size_t>> pool;
    for (const auto& u : ds.items) pool.emplace(u.text, u.label);
    for (const auto& e : set.exemplars) EXPECT_TRUE(pool.count({e.text, e.label}));
}

TEST(SampleFewShot, ZeroShotIsEmpty) {
    EXPECT_EQ(sample_few_shot(synthetic(4, 2), {0, RandomSeeded{1}}).size(), 0u);
    EXPECT_EQ(sample_few_shot(Dataset{LabelSet({"a"}), {}, Split::Train}, {0, RandomSeeded{1}}).size(), 0u);
}

TEST(SampleFewShot, TakesEverythingWhenClassesAreExactlyN) {
    auto ds = synthetic(10, 5);
    auto set = sample_few_shot(ds, {5, RandomSeeded{3}});
    ASSERT_EQ(set.size(), 50u);
    std::vector<std::size_t> counts(10, 0);
    for (const auto& e : set.exemplars) ++counts[e.label];
    for (auto n : counts) EXPECT_EQ(n, 5u);
    std::multiset<std::string> a, b;
    for (const auto& e : set.exemplars) a.insert(e.text);
    for (const auto& u : ds.items) b.insert(u.text);
    EXPECT_EQ(a, b);
}

TEST(SampleFewShot, DeterministicForSeedAndSensitiveToIt) {
    auto ds = synthetic(6, 40);
    auto a = sample_few_shot(ds, {3, RandomSeeded{42}});
    auto b = sample_few_shot(ds, {3, RandomSeeded{42}});
    auto c = sample_few_shot(ds, {3, RandomSeeded{43}});
    EXPECT_EQ(a.exemplars, b.exemplars);
    EXPECT_NE(a.exemplars, c.exemplars);
}

TEST(SampleFewShot, ShortageIsReported) {
    auto ds = synthetic(3, 2);
    EXPECT_ERRC(sample_few_shot(ds, {3, RandomSeeded{1}}), Errc::ClassShortage);
    EXPECT_ERRC(sample_few_shot(ds, {1, Mixed{1, 0}}), Errc::InvalidArgument);
}

TEST(SampleFewShot, CuratedKeepsRankThenFileOrder) {
    TempDir dir;
    auto ds = synthetic(2, 1);
    write_file(dir / "cur.jsonl",
               "{\"text\":\"b-second\",\"label\":\"class_1\",\"rank\":2}\n"
               "{\"text\":\"a-first\",\"label\":\"class_0\"}\n"
               "{\"text\":\"b-first\",\"label\":\"class_1\",\"rank\":1}\n"
               "{\"text\":\"a-second\",\"label\":\"class_0\"}\n"
               "{\"text\":\"a-third\",\"label\":\"class_0\"}\n");
    auto set = sample_few_shot(ds, {2, CuratedFile{dir / "cur.jsonl"}});
    ASSERT_EQ(set.size(), 4u);
    EXPECT_EQ(set.exemplars[0].text, "a-first");
    EXPECT_EQ(set.exemplars[1].text, "a-second");
    EXPECT_EQ(set.exemplars[2].text, "b-first");
    EXPECT_EQ(set.exemplars[3].text, "b-second");
    for (const auto& e : set.exemplars) EXPECT_EQ(e.origin, Origin::Curated);

    EXPECT_ERRC(sample_few_shot(ds, {3, CuratedFile{dir / "cur.jsonl"}}), Errc::ClassShortage);
    write_file(dir / "missing.jsonl", "{\"text\":\"only a\",\"label\":\"class_0\"}\n");
    EXPECT_ERRC(sample_few_shot(ds, {1, CuratedFile{dir / "missing.jsonl"}}), Errc::CuratedFileMissingClass);
}

TEST(MixAugmented, RatiosYieldExpectedShotsAndOrigins) {
    auto labels = banking();
    auto original = load_exemplars(testsupport::fixtures() / "banking77_exemplars_231.jsonl", labels);
    ASSERT_EQ(original.size(), 231u);
    auto generated = generated_set(labels, 17);
    for (std::size_t g : {2u, 7u, 12u, 17u}) {
        auto mixed = mix_augmented(original, generated, {3, g});
        EXPECT_EQ(mixed.size(), (3 + g) * 77);
        std::vector<std::size_t> orig(77, 0), gen(77, 0);
        for (const auto& e : mixed.exemplars) ++(e.origin == Origin::Generated ? gen : orig)[e.label];
        for (std::size_t c = 0; c < 77; ++c) {
            EXPECT_EQ(orig[c], 3u);
            EXPECT_EQ(gen[c], g);
        }
        // Per class: originals first, then generated.
        for (std::size_t i = 0; i < mixed.size(); i += 3 + g) {
            for (std::size_t j = 0; j < 3 + g; ++j) {
                EXPECT_EQ(mixed.exemplars[i + j].origin == Origin::Generated, j >= 3);
            }
        }
        std::set<std::pair<std::string, std::size_t>> seen;
        for (const auto& e : mixed.exemplars) EXPECT_TRUE(seen.emplace(e.text, e.label).second);
    }
    EXPECT_EQ(mix_augmented(original, generated, {3, 0}).exemplars, original.exemplars);
    EXPECT_ERRC(mix_augmented(original, generated_set(labels, 1), {3, 2}), Errc::GeneratedShortage);
    EXPECT_ERRC(mix_augmented(original, generated, {4, 2}), Errc::ClassShortage);
}

TEST(Exemplars, SaveLoadRoundTrip) {
    TempDir dir;
    auto ds = synthetic(3, 4);
    auto set = sample_few_shot(ds, {2, RandomSeeded{5}});
    set.exemplars[1].origin = Origin::Generated;
    save_exemplars(dir / "ex.jsonl", set);
    auto back = load_exemplars(dir / "ex.jsonl", ds.labels);
    EXPECT_EQ(back.exemplars, set.exemplars);
    auto first = nlohmann::json::parse(split_lines(read_file(dir / "ex.jsonl")).front());
    EXPECT_EQ(first["id"], 0);
    EXPECT_EQ(first["origin"], "original");
}

TEST(Shuffler, PermutationIsStable) {
    std::vector<int> v(10);
    for (int i = 0; i < 10; ++i) v[i] = i;
    auto w = v;
    SeededShuffler(99).shuffle(v);
    SeededShuffler(99).shuffle(w);
    EXPECT_EQ(v, w);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(w, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

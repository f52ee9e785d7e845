#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "doctest.h"
#include "rine/corpus.hpp"

using namespace rine;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "rine_corpus_tests";
  fs::create_directories(dir);
  return dir / name;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

int depth_of(const TreeNode& n) {
  if (n.leaf) return 0;
  int d = 0;
  for (const auto& c : n.children) d = std::max(d, depth_of(c));
  bool real = n.label.kind == LabelKind::Intent || n.label.kind == LabelKind::Slot;
  return d + (real ? 1 : 0);
}

std::set<std::string> label_names(const std::vector<ParseTree>& trees) {
  std::set<std::string> names;
  for (const auto& t : trees)
    for (const auto& s : spans(t)) names.insert(s.label.name);
  return names;
}

}  // namespace

TEST_CASE("default top grammar generates valid varied trees") {
  GrammarSpec spec = GrammarSpec::default_top();
  auto trees = generate(spec, 200);
  REQUIRE(trees.size() == 200);
  size_t composite = 0;
  GrammarSpec ready = spec;
  ready.finalize();
  std::set<std::string> vocab(ready.vocab.begin(), ready.vocab.end());
  for (const auto& t : trees) {
    t.validate();
    CHECK(t.profile == TaskProfile::TOP);
    CHECK(t.root.label.kind == LabelKind::Intent);
    CHECK(depth_of(t.root) <= spec.max_depth);
    for (const auto& tok : t.leaves()) CHECK(vocab.count(tok) == 1);
    if (!is_flat(t)) composite++;
  }
  CHECK(composite > 40);
  CHECK(composite < 180);
}

TEST_CASE("generation is deterministic in the seed") {
  GrammarSpec spec = GrammarSpec::default_top();
  auto a = generate(spec, 30);
  auto b = generate(spec, 30);
  CHECK(a == b);
  spec.seed = 99;
  auto c = generate(spec, 30);
  CHECK_FALSE(a == c);
}

TEST_CASE("default ner grammar nests entities and allows bare sentences") {
  GrammarSpec spec = GrammarSpec::default_ner();
  auto trees = generate(spec, 200);
  size_t bare = 0, nested = 0;
  for (const auto& t : trees) {
    t.validate();
    CHECK(t.profile == TaskProfile::NestedNER);
    CHECK(depth_of(t.root) <= spec.max_depth);
    if (t.non_terminal_count() == 0) bare++;
    if (!is_flat(t)) nested++;
    for (const auto& s : spans(t)) CHECK(s.label.kind == LabelKind::Slot);
  }
  CHECK(bare > 0);
  CHECK(nested > 0);
}

TEST_CASE("jsonl write then read is the identity") {
  auto trees = generate(GrammarSpec::default_top(), 25);
  auto path = temp_file("roundtrip.jsonl");
  write_jsonl(path.string(), trees);
  auto result = read_jsonl(path.string(), TaskProfile::TOP);
  CHECK(result.errors.empty());
  CHECK(result.trees == trees);
}

TEST_CASE("jsonl reader collects line errors") {
  auto path = temp_file("bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"tokens": ["a"], "tree": "[IN:X a IN:X]"})" << "\n";
    out << "not json\n";
    out << R"({"tokens": ["a", "b"], "tree": "[IN:X a IN:X]"})" << "\n";
    out << R"({"tokens": ["a"]})" << "\n";
  }
  auto result = read_jsonl(path.string(), TaskProfile::TOP);
  CHECK(result.trees.size() == 1);
  REQUIRE(result.errors.size() == 3);
  CHECK(result.errors[0].line == 2);
  CHECK(result.errors[1].line == 3);
  CHECK(result.errors[1].message.find("LeafMismatch") != std::string::npos);
  CHECK(result.errors[2].line == 4);
}

TEST_CASE("tsv reader parses plain close trees") {
  auto path = temp_file("corpus.tsv");
  {
    std::ofstream out(path);
    out << "What is it\twhat is it\t[IN:X what is it ]\n";
    out << "Broken\tbroken\t[IN:X broken\n";
    out << "Too few columns\n";
    out << "Bad tokens\ta b\t[IN:X a ]\n";
  }
  auto result = read_top_tsv(path.string(), TaskProfile::TOP);
  REQUIRE(result.trees.size() == 1);
  CHECK(result.trees[0].leaves() ==
        std::vector<std::string>{"what", "is", "it"});
  REQUIRE(result.errors.size() == 3);
  CHECK(result.errors[0].line == 2);
  CHECK(result.errors[0].message.find("UnbalancedBrackets") !=
        std::string::npos);
  CHECK(result.errors[1].line == 3);
  CHECK(result.errors[2].message.find("LeafMismatch") != std::string::npos);
}

TEST_CASE("utterance reader accepts tokens or trees") {
  auto path = temp_file("utts.jsonl");
  {
    std::ofstream out(path);
    out << R"({"tokens": ["hello", "there"]})" << "\n";
    out << R"({"tree": "[IN:X some words IN:X]"})" << "\n";
    out << R"({"neither": 1})" << "\n";
  }
  auto result = read_utterances_jsonl(path.string());
  REQUIRE(result.utterances.size() == 2);
  CHECK(result.utterances[0] == std::vector<std::string>{"hello", "there"});
  CHECK(result.utterances[1] == std::vector<std::string>{"some", "words"});
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].line == 3);
}

TEST_CASE("split is disjoint and exhaustive") {
  auto trees = generate(GrammarSpec::default_top(), 50);
  auto split = split_corpus(trees, 30, 10, 10, 7);
  CHECK(split.train.size() == 30);
  CHECK(split.valid.size() == 10);
  CHECK(split.test.size() == 10);
  std::multiset<std::string> all, parts;
  for (const auto& t : trees) all.insert(serialize(t, TreeFormat::LabeledClose));
  for (const auto* part : {&split.train, &split.valid, &split.test})
    for (const auto& t : *part)
      parts.insert(serialize(t, TreeFormat::LabeledClose));
  CHECK(all == parts);
  CHECK(kind_of([&] { split_corpus(trees, 40, 10, 10, 7); }) ==
        ErrorKind::BadConfig);
}

TEST_CASE("per label subsampling keeps label coverage") {
  auto trees = generate(GrammarSpec::default_top(), 120);
  auto subset = subsample_per_label(trees, 1, 3);
  CHECK(subset.size() < trees.size());
  CHECK(label_names(subset) == label_names(trees));
}

TEST_CASE("grammar json round trips") {
  GrammarSpec spec = GrammarSpec::default_top();
  auto path = temp_file("grammar.json");
  {
    std::ofstream out(path);
    out << spec.to_json();
  }
  GrammarSpec loaded = GrammarSpec::load_json_file(path.string());
  CHECK(generate(loaded, 10) == generate(spec, 10));
}

TEST_CASE("word pools can be derived from a flat vocab") {
  GrammarSpec spec;
  spec.intents = {"IN:ALPHA"};
  spec.slots = {"SL:BETA"};
  spec.intent_slots = {{"IN:ALPHA", {"SL:BETA"}}};
  spec.vocab = {"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9"};
  spec.seed = 5;
  auto trees = generate(spec, 20);
  CHECK(trees.size() == 20);
  for (const auto& t : trees) CHECK(t.root.label.name == "IN:ALPHA");
}

TEST_CASE("grammar validation rejects inconsistent specs") {
  CHECK(kind_of([] {
          GrammarSpec g;
          g.profile = TaskProfile::TOP;
          g.finalize();
        }) == ErrorKind::SpecInconsistent);
  CHECK(kind_of([] {
          GrammarSpec g = GrammarSpec::default_top();
          g.nesting_prob = 1.5;
          g.finalize();
        }) == ErrorKind::SpecInconsistent);
  CHECK(kind_of([] {
          GrammarSpec g = GrammarSpec::default_top();
          g.intent_slots["IN:GET_WEATHER"].push_back("SL:MISSING");
          g.finalize();
        }) == ErrorKind::SpecInconsistent);
  CHECK(kind_of([] {
          GrammarSpec g = GrammarSpec::default_top();
          g.slot_words["SL:TODO"][0] = "remind";  // reused intent cue
          g.finalize();
        }) == ErrorKind::SpecInconsistent);
  CHECK(kind_of([] {
          GrammarSpec g = GrammarSpec::default_ner();
          g.intents = {"IN:NOPE"};
          g.finalize();
        }) == ErrorKind::SpecInconsistent);
}

TEST_CASE("decomposition dump is one json line per step") {
  ParseTree tree = parse_linearized(
      "[IN:GET_DIRECTIONS way [SL:DESTINATION home SL:DESTINATION] "
      "IN:GET_DIRECTIONS]",
      TreeFormat::LabeledClose);
  auto path = temp_file("steps.jsonl");
  write_decomposition_jsonl(path.string(), tree, Ordering::TopDown);
  std::ifstream in(path);
  std::string line;
  size_t lines = 0;
  while (std::getline(in, line)) {
    CHECK(line.find("\"partial\"") != std::string::npos);
    CHECK(line.find("\"label\"") != std::string::npos);
    lines++;
  }
  CHECK(lines == tree.non_terminal_count());
}

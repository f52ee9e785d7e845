#include "rine/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rine/common.hpp"

namespace rine {
namespace {

using nlohmann::json;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::string col;
  std::istringstream in(line);
  while (std::getline(in, col, '\t')) cols.push_back(col);
  return cols;
}

void check_pool(const std::string& what, const std::vector<std::string>& pool,
                std::set<std::string>& seen) {
  if (pool.empty())
    throw Error(ErrorKind::SpecInconsistent, "empty word pool for " + what);
  for (const auto& w : pool) {
    if (w.empty() || !seen.insert(w).second)
      throw Error(ErrorKind::SpecInconsistent,
                  "word '" + w + "' in pool for " + what +
                      " is empty or reused across pools");
  }
}

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  return pool[rng.below(pool.size())];
}

class Generator {
 public:
  Generator(const GrammarSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {}

  ParseTree tree() {
    ParseTree t;
    t.profile = spec_.profile;
    t.root = spec_.profile == TaskProfile::TOP ? intent(1, true) : sentence();
    t.validate();
    return t;
  }

 private:
  TreeNode intent(int depth, bool is_root) {
    const std::string& name = pick(spec_.intents, rng_);
    TreeNode node = TreeNode::make_node(Label::from_name(name), {});
    size_t lead = between(spec_.lead_tokens_min, spec_.lead_tokens_max);
    const auto& cues = spec_.intent_cues.at(name);
    for (size_t i = 0; i < lead; i++) node.children.push_back(leaf(cues));

    auto menu_it = spec_.intent_slots.find(name);
    bool slots_fit = depth + 1 <= spec_.max_depth;
    if (menu_it != spec_.intent_slots.end() && !menu_it->second.empty() &&
        slots_fit) {
      std::vector<std::string> menu = menu_it->second;
      rng_.shuffle(menu);
      size_t k = between(std::min<size_t>(spec_.slots_min, menu.size()),
                         std::min<size_t>(spec_.slots_max, menu.size()));
      for (size_t s = 0; s < k; s++) {
        if (is_root) fillers(node, spec_.gap_tokens_min, spec_.gap_tokens_max);
        node.children.push_back(slot(menu[s], depth + 1));
      }
      if (is_root && rng_.bernoulli(0.5))
        node.children.push_back(leaf(spec_.fillers));
    }
    return node;
  }

  TreeNode slot(const std::string& name, int depth) {
    TreeNode node = TreeNode::make_node(Label::from_name(name), {});
    if (depth + 1 <= spec_.max_depth && rng_.bernoulli(spec_.nesting_prob)) {
      node.children.push_back(intent(depth + 1, false));
      // own-pool words beside the nested intent keep the slot label
      // inferable from the text, as in the entity() branch below
      words(node, spec_.slot_words.at(name), 1, spec_.slot_tokens_max);
    } else {
      words(node, spec_.slot_words.at(name), spec_.slot_tokens_min,
            spec_.slot_tokens_max);
    }
    return node;
  }

  TreeNode sentence() {
    TreeNode root = TreeNode::make_node(Label::virtual_root(), {});
    fillers(root, 1, 2);
    size_t k = between(spec_.slots_min, spec_.slots_max);
    for (size_t e = 0; e < k; e++) {
      root.children.push_back(entity(1));
      fillers(root, spec_.gap_tokens_min, spec_.gap_tokens_max);
    }
    return root;
  }

  TreeNode entity(int depth) {
    const std::string& name = pick(spec_.slots, rng_);
    TreeNode node = TreeNode::make_node(Label::from_name(name), {});
    if (depth + 1 <= spec_.max_depth && rng_.bernoulli(spec_.nesting_prob)) {
      node.children.push_back(entity(depth + 1));
      words(node, spec_.slot_words.at(name), 1, spec_.slot_tokens_max);
    } else {
      words(node, spec_.slot_words.at(name), spec_.slot_tokens_min,
            spec_.slot_tokens_max);
    }
    return node;
  }

  TreeNode leaf(const std::vector<std::string>& pool) {
    return TreeNode::make_leaf(pick(pool, rng_));
  }

  size_t between(int64_t lo, int64_t hi) {
    return static_cast<size_t>(rng_.range(lo, std::max(lo, hi)));
  }

  void words(TreeNode& node, const std::vector<std::string>& pool, int lo,
             int hi) {
    size_t k = between(std::max(1, lo), std::max(1, hi));
    for (size_t i = 0; i < k; i++) node.children.push_back(leaf(pool));
  }

  void fillers(TreeNode& node, int lo, int hi) {
    size_t k = between(lo, hi);
    for (size_t i = 0; i < k; i++) node.children.push_back(leaf(spec_.fillers));
  }

  const GrammarSpec& spec_;
  Rng& rng_;
};

void from_json_field(const json& j, const char* key, double& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}
void from_json_field(const json& j, const char* key, int& out) {
  if (j.contains(key)) out = j.at(key).get<int>();
}
void from_json_field(const json& j, const char* key, uint64_t& out) {
  if (j.contains(key)) out = j.at(key).get<uint64_t>();
}
void from_json_field(const json& j, const char* key,
                     std::vector<std::string>& out) {
  if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
}
void from_json_field(const json& j, const char* key,
                     std::map<std::string, std::vector<std::string>>& out) {
  if (j.contains(key))
    out = j.at(key).get<std::map<std::string, std::vector<std::string>>>();
}

std::set<std::string> tree_label_names(const ParseTree& tree) {
  std::set<std::string> names;
  for (const auto& s : spans(tree)) names.insert(s.label.name);
  return names;
}

}  // namespace

void GrammarSpec::finalize() {
  if (profile == TaskProfile::TOP) {
    if (intents.empty())
      throw Error(ErrorKind::SpecInconsistent, "top grammar needs intents");
  } else if (!intents.empty()) {
    throw Error(ErrorKind::SpecInconsistent, "ner grammar must not declare intents");
  }
  if (slots.empty() && profile == TaskProfile::NestedNER)
    throw Error(ErrorKind::SpecInconsistent, "ner grammar needs slots");
  for (const auto& name : intents)
    if (Label::from_name(name).kind != LabelKind::Intent)
      throw Error(ErrorKind::SpecInconsistent, "not an intent label: " + name);
  for (const auto& name : slots)
    if (Label::from_name(name).kind != LabelKind::Slot)
      throw Error(ErrorKind::SpecInconsistent, "not a slot label: " + name);
  auto declared = [](const std::vector<std::string>& pool,
                     const std::string& name) {
    return std::find(pool.begin(), pool.end(), name) != pool.end();
  };
  for (const auto& [intent, menu] : intent_slots) {
    if (!declared(intents, intent))
      throw Error(ErrorKind::SpecInconsistent, "menu for undeclared intent " + intent);
    for (const auto& s : menu)
      if (!declared(slots, s))
        throw Error(ErrorKind::SpecInconsistent, "menu references undeclared slot " + s);
  }
  if (nesting_prob < 0.0 || nesting_prob > 1.0)
    throw Error(ErrorKind::SpecInconsistent, "nesting_prob outside [0, 1]");
  if (max_depth < 1) throw Error(ErrorKind::SpecInconsistent, "max_depth < 1");
  auto check_range = [](const char* what, int lo, int hi, int floor) {
    if (lo < floor || hi < lo)
      throw Error(ErrorKind::SpecInconsistent,
                  std::string("bad token range for ") + what);
  };
  check_range("lead_tokens", lead_tokens_min, lead_tokens_max, 1);
  check_range("slots", slots_min, slots_max, 0);
  check_range("slot_tokens", slot_tokens_min, slot_tokens_max, 1);
  check_range("gap_tokens", gap_tokens_min, gap_tokens_max, 0);

  bool have_pools = !intent_cues.empty() || !slot_words.empty() || !fillers.empty();
  if (!have_pools) {
    // derive pools as disjoint consecutive slices of vocab
    size_t need = intents.size() + slots.size() + 1;
    if (vocab.size() < need)
      throw Error(ErrorKind::SpecInconsistent,
                  "vocab too small: need at least " + std::to_string(need) +
                      " words, have " + std::to_string(vocab.size()));
    size_t cue_per =
        intents.empty()
            ? 0
            : std::max<size_t>(1, vocab.size() / 5 / intents.size());
    size_t slot_per =
        std::max<size_t>(1, vocab.size() * 13 / 20 / std::max<size_t>(1, slots.size()));
    size_t pos = 0;
    for (const auto& name : intents) {
      intent_cues[name].assign(vocab.begin() + pos, vocab.begin() + pos + cue_per);
      pos += cue_per;
    }
    for (const auto& name : slots) {
      if (pos + slot_per + 1 > vocab.size())
        throw Error(ErrorKind::SpecInconsistent, "vocab too small for slot pools");
      slot_words[name].assign(vocab.begin() + pos, vocab.begin() + pos + slot_per);
      pos += slot_per;
    }
    fillers.assign(vocab.begin() + pos, vocab.end());
  }
  std::set<std::string> seen;
  for (const auto& name : intents) {
    auto it = intent_cues.find(name);
    if (it == intent_cues.end())
      throw Error(ErrorKind::SpecInconsistent, "no cue pool for " + name);
    check_pool(name, it->second, seen);
  }
  for (const auto& name : slots) {
    auto it = slot_words.find(name);
    if (it == slot_words.end())
      throw Error(ErrorKind::SpecInconsistent, "no word pool for " + name);
    check_pool(name, it->second, seen);
  }
  check_pool("fillers", fillers, seen);
  vocab.assign(seen.begin(), seen.end());
}

std::vector<ParseTree> generate(const GrammarSpec& spec, size_t n) {
  GrammarSpec ready = spec;
  ready.finalize();
  Rng rng(ready.seed);
  Generator gen(ready, rng);
  std::vector<ParseTree> trees;
  trees.reserve(n);
  for (size_t i = 0; i < n; i++) trees.push_back(gen.tree());
  return trees;
}

GrammarSpec GrammarSpec::default_top() {
  GrammarSpec g;
  g.profile = TaskProfile::TOP;
  g.intents = {"IN:GET_EVENT",        "IN:GET_DIRECTIONS", "IN:GET_WEATHER",
               "IN:CREATE_REMINDER",  "IN:PLAY_MUSIC",     "IN:GET_TRAFFIC"};
  g.slots = {"SL:DATE_TIME", "SL:LOCATION",          "SL:DESTINATION",
             "SL:SOURCE",    "SL:CATEGORY_EVENT",    "SL:CONTACT",
             "SL:MUSIC_TYPE", "SL:WEATHER_ATTRIBUTE", "SL:TODO",
             "SL:PATH"};
  g.intent_cues = {
      {"IN:GET_EVENT", {"concerts", "events", "happening", "festivals"}},
      {"IN:GET_DIRECTIONS", {"directions", "route", "navigate", "way"}},
      {"IN:GET_WEATHER", {"weather", "forecast", "temperature", "rain"}},
      {"IN:CREATE_REMINDER", {"remind", "reminder", "remember", "note"}},
      {"IN:PLAY_MUSIC", {"play", "music", "listen", "songs"}},
      {"IN:GET_TRAFFIC", {"traffic", "congestion", "jam", "delays"}},
  };
  g.slot_words = {
      {"SL:DATE_TIME",
       {"tonight", "tomorrow", "monday", "friday", "weekend", "morning",
        "evening", "noon"}},
      {"SL:LOCATION",
       {"downtown", "boston", "seattle", "park", "beach", "airport", "stadium",
        "museum"}},
      {"SL:DESTINATION",
       {"home", "office", "school", "gym", "library", "mall", "station",
        "clinic"}},
      {"SL:SOURCE",
       {"here", "work", "hotel", "campus", "harbor", "plaza", "garage",
        "terminal"}},
      {"SL:CATEGORY_EVENT",
       {"jazz", "theater", "comedy", "opera", "ballet", "circus", "parade",
        "fair"}},
      {"SL:CONTACT",
       {"alice", "bob", "carol", "david", "emma", "frank", "grace", "henry"}},
      {"SL:MUSIC_TYPE",
       {"rock", "blues", "classical", "country", "reggae", "metal", "folk",
        "disco"}},
      {"SL:WEATHER_ATTRIBUTE",
       {"sunny", "windy", "humid", "snowy", "cloudy", "foggy", "stormy",
        "chilly"}},
      {"SL:TODO",
       {"groceries", "laundry", "dishes", "homework", "taxes", "dentist",
        "meeting", "workout"}},
      {"SL:PATH",
       {"highway", "bridge", "tunnel", "avenue", "boulevard", "freeway",
        "interstate", "turnpike"}},
  };
  g.fillers = {"the", "a",      "to",   "in",   "on",   "at",   "for",  "me",
               "my",  "please", "some", "near", "by",   "with", "this", "that"};
  g.intent_slots = {
      {"IN:GET_EVENT", {"SL:DATE_TIME", "SL:LOCATION", "SL:CATEGORY_EVENT"}},
      {"IN:GET_DIRECTIONS",
       {"SL:DESTINATION", "SL:SOURCE", "SL:PATH", "SL:DATE_TIME"}},
      {"IN:GET_WEATHER", {"SL:DATE_TIME", "SL:LOCATION", "SL:WEATHER_ATTRIBUTE"}},
      {"IN:CREATE_REMINDER", {"SL:TODO", "SL:DATE_TIME", "SL:CONTACT"}},
      {"IN:PLAY_MUSIC", {"SL:MUSIC_TYPE", "SL:DATE_TIME"}},
      {"IN:GET_TRAFFIC", {"SL:LOCATION", "SL:PATH", "SL:SOURCE"}},
  };
  return g;
}

GrammarSpec GrammarSpec::default_ner() {
  GrammarSpec g;
  g.profile = TaskProfile::NestedNER;
  g.slots = {"SL:PERSON",   "SL:ORG",     "SL:LOCATION", "SL:GPE",
             "SL:FACILITY", "SL:VEHICLE", "SL:PRODUCT"};
  g.slot_words = {
      {"SL:PERSON",
       {"smith", "johnson", "garcia", "chen", "patel", "kim", "lopez",
        "murphy"}},
      {"SL:ORG",
       {"acme", "globex", "initech", "umbrella", "cyberdyne", "wayne", "stark",
        "oscorp"}},
      {"SL:LOCATION",
       {"river", "mountain", "valley", "coast", "island", "desert", "canyon",
        "lake"}},
      {"SL:GPE",
       {"france", "japan", "brazil", "canada", "egypt", "india", "norway",
        "peru"}},
      {"SL:FACILITY",
       {"factory", "hospital", "warehouse", "laboratory", "refinery", "depot",
        "shipyard", "observatory"}},
      {"SL:VEHICLE",
       {"sedan", "truck", "ferry", "helicopter", "submarine", "tram",
        "scooter", "yacht"}},
      {"SL:PRODUCT",
       {"widget", "gadget", "laptop", "camera", "printer", "toaster", "drone",
        "console"}},
  };
  g.fillers = {"the", "a",    "an",      "of",    "in",  "at",  "near",
               "from", "visited", "works", "for", "with", "went",
               "to",  "on",   "by",      "and",   "old", "new", "big"};
  g.slots_min = 0;
  return g;
}

GrammarSpec GrammarSpec::load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, path + ": " + e.what());
  }
  GrammarSpec g;
  try {
    if (j.contains("profile")) g.profile = profile_from_name(j.at("profile"));
    from_json_field(j, "intents", g.intents);
    from_json_field(j, "slots", g.slots);
    from_json_field(j, "vocab", g.vocab);
    from_json_field(j, "intent_slots", g.intent_slots);
    from_json_field(j, "intent_cues", g.intent_cues);
    from_json_field(j, "slot_words", g.slot_words);
    from_json_field(j, "fillers", g.fillers);
    from_json_field(j, "nesting_prob", g.nesting_prob);
    from_json_field(j, "max_depth", g.max_depth);
    from_json_field(j, "lead_tokens_min", g.lead_tokens_min);
    from_json_field(j, "lead_tokens_max", g.lead_tokens_max);
    from_json_field(j, "slots_min", g.slots_min);
    from_json_field(j, "slots_max", g.slots_max);
    from_json_field(j, "slot_tokens_min", g.slot_tokens_min);
    from_json_field(j, "slot_tokens_max", g.slot_tokens_max);
    from_json_field(j, "gap_tokens_min", g.gap_tokens_min);
    from_json_field(j, "gap_tokens_max", g.gap_tokens_max);
    from_json_field(j, "seed", g.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, path + ": " + e.what());
  }
  g.finalize();
  return g;
}

std::string GrammarSpec::to_json() const {
  json j;
  j["profile"] = profile_name(profile);
  j["intents"] = intents;
  j["slots"] = slots;
  j["vocab"] = vocab;
  j["intent_slots"] = intent_slots;
  j["intent_cues"] = intent_cues;
  j["slot_words"] = slot_words;
  j["fillers"] = fillers;
  j["nesting_prob"] = nesting_prob;
  j["max_depth"] = max_depth;
  j["lead_tokens_min"] = lead_tokens_min;
  j["lead_tokens_max"] = lead_tokens_max;
  j["slots_min"] = slots_min;
  j["slots_max"] = slots_max;
  j["slot_tokens_min"] = slot_tokens_min;
  j["slot_tokens_max"] = slot_tokens_max;
  j["gap_tokens_min"] = gap_tokens_min;
  j["gap_tokens_max"] = gap_tokens_max;
  j["seed"] = seed;
  return j.dump(2);
}

CorpusReadResult read_jsonl(const std::string& path, TaskProfile profile) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  CorpusReadResult result;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      auto tokens = j.at("tokens").get<std::vector<std::string>>();
      ParseTree tree = parse_linearized(j.at("tree").get<std::string>(),
                                        TreeFormat::LabeledClose, profile);
      if (tree.leaves() != tokens)
        throw Error(ErrorKind::LeafMismatch,
                    "tokens field disagrees with tree leaves");
      result.trees.push_back(std::move(tree));
    } catch (const std::exception& e) {
      result.errors.push_back({lineno, e.what()});
    }
  }
  return result;
}

void write_jsonl(const std::string& path, const std::vector<ParseTree>& trees) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path);
  for (const auto& tree : trees) {
    json j;
    j["tokens"] = tree.leaves();
    j["tree"] = serialize(tree, TreeFormat::LabeledClose);
    out << j.dump() << "\n";
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

CorpusReadResult read_top_tsv(const std::string& path, TaskProfile profile) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  CorpusReadResult result;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      auto cols = split_tabs(line);
      if (cols.size() != 3)
        throw Error(ErrorKind::BadRecord,
                    "expected 3 tab-separated columns, got " +
                        std::to_string(cols.size()));
      ParseTree tree =
          parse_linearized(cols[2], TreeFormat::PlainClose, profile);
      if (tree.leaves() != split_whitespace(cols[1]))
        throw Error(ErrorKind::LeafMismatch,
                    "tokenized utterance disagrees with tree leaves");
      result.trees.push_back(std::move(tree));
    } catch (const std::exception& e) {
      result.errors.push_back({lineno, e.what()});
    }
  }
  return result;
}

UtteranceReadResult read_utterances_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  UtteranceReadResult result;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (j.contains("tokens")) {
        result.utterances.push_back(j.at("tokens").get<std::vector<std::string>>());
      } else if (j.contains("tree")) {
        ParseTree tree = parse_linearized(j.at("tree").get<std::string>(),
                                          TreeFormat::LabeledClose);
        result.utterances.push_back(tree.leaves());
      } else {
        throw Error(ErrorKind::BadRecord, "record has neither tokens nor tree");
      }
    } catch (const std::exception& e) {
      result.errors.push_back({lineno, e.what()});
    }
  }
  return result;
}

CorpusSplit split_corpus(const std::vector<ParseTree>& trees, size_t n_train,
                         size_t n_valid, size_t n_test, uint64_t seed) {
  if (n_train + n_valid + n_test > trees.size())
    throw Error(ErrorKind::BadConfig,
                "split sizes exceed corpus size " + std::to_string(trees.size()));
  std::vector<size_t> order(trees.size());
  for (size_t i = 0; i < order.size(); i++) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  CorpusSplit split;
  size_t pos = 0;
  for (auto* part : {&split.train, &split.valid, &split.test}) {
    size_t want = part == &split.train ? n_train
                  : part == &split.valid ? n_valid
                                         : n_test;
    for (size_t i = 0; i < want; i++) part->push_back(trees[order[pos++]]);
  }
  return split;
}

std::vector<ParseTree> subsample_per_label(const std::vector<ParseTree>& trees,
                                           size_t per_label, uint64_t seed) {
  std::vector<size_t> order(trees.size());
  for (size_t i = 0; i < order.size(); i++) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::map<std::string, size_t> counts;
  std::vector<size_t> picked;
  for (size_t idx : order) {
    auto labels = tree_label_names(trees[idx]);
    bool needed = false;
    for (const auto& name : labels)
      if (counts[name] < per_label) needed = true;
    if (!needed) continue;
    for (const auto& name : labels) counts[name]++;
    picked.push_back(idx);
  }
  std::sort(picked.begin(), picked.end());
  std::vector<ParseTree> out;
  out.reserve(picked.size());
  for (size_t idx : picked) out.push_back(trees[idx]);
  return out;
}

void write_decomposition_jsonl(const std::string& path, const ParseTree& tree,
                               Ordering ordering) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path);
  for (const auto& step : decompose(tree, ordering)) {
    json j;
    j["partial"] = seq_to_string(step.partial, TreeFormat::LabeledClose);
    j["label"] = step.step.label.name;
    j["i"] = step.step.i;
    j["j"] = step.step.j;
    out << j.dump() << "\n";
  }
}

}  // namespace rine

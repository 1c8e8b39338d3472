#include "cogen/corpus/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "cogen/core/rng.hpp"
#include "cogen/error.hpp"

namespace cogen {

namespace {

constexpr std::array<std::string_view, 80> kEntities = {
    "alder",    "birchwood", "calloway", "dunmore",  "elmsford", "fairhaven", "glenrock", "hartwell",
    "ivydale",  "juniper",   "kestrel",  "larkspur", "marlowe",  "northgate", "oakhurst", "pinecrest",
    "quarry",   "redfern",   "stonebay", "thistle",  "umber",    "valewood",  "willowby", "yarrow",
    "zephyr",   "ashcombe",  "brightmoor", "copperfield", "driftwood", "emberly", "foxglove", "greyhaven",
    "hollins",  "inverness", "jasperton", "kingsley", "lindale",  "meadowlark", "netherby", "orchardly",
    "pemberly", "quillon",   "rosedale", "sandmere", "tamsin",   "underhill", "verity",   "westbrook",
    "wrenfield", "yorkton",  "amberly",  "bramble",  "cinderby", "dovecote",  "eastwick", "fernhill",
    "goldcrest", "heathrow_lane", "islay", "jessamy", "kelby",   "loxley",    "mistral",  "norcross",
    "ottery",   "paxton",    "quenby",   "ravenna",  "selby",    "torrington", "ulverly", "vantage",
    "whitcombe", "yewbank",  "zennor",   "arlow",    "bexley",   "corwen",    "denby",    "elstow"};

constexpr std::array<std::string_view, 7> kDays = {"monday", "tuesday", "wednesday", "thursday",
                                                   "friday", "saturday", "sunday"};
constexpr std::array<std::string_view, 10> kAdjectives = {"quiet", "busy",   "sunny",  "long",   "slow",
                                                          "rainy", "bright", "strange", "gentle", "hectic"};
constexpr std::array<std::string_view, 12> kNouns = {"report", "garden", "meeting", "trip",   "workshop", "dinner",
                                                     "project", "concert", "lecture", "market", "recipe", "class"};

// {E} entity, {D} day, {A} adjective, {N} generic noun.
constexpr std::array<std::string_view, 24> kSentences = {
    "last {D} i visited {E} with my friend {E} .",
    "the {A} afternoon at {E} reminded me of the {N} .",
    "i have been working on {E} for a few weeks now .",
    "my favorite place to relax is {E} near {E} .",
    "we finally finished the {N} for {E} on {D} .",
    "{E} asked me to share a few notes about the {N} .",
    "every {D} i take a long walk through {E} .",
    "the team at {E} is planning a {A} {N} next month .",
    "i wrote a short piece about {E} and the {N} .",
    "it was a {A} day and {E} joined us for the {N} .",
    "thanks to {E} the {N} went better than expected .",
    "next {D} we will meet at {E} to review the {N} .",
    "i still think about the {A} evening at {E} .",
    "my notes from the {N} at {E} are finally done .",
    "on {D} morning i cooked breakfast with {E} .",
    "the {N} was {A} but {E} kept everyone smiling .",
    "we drove back from {E} after the {N} ended .",
    "i am grateful that {E} helped with the {N} .",
    "the road to {E} was {A} on {D} .",
    "my plan for the week is to finish the {N} at {E} .",
    "a {A} {N} at {E} made my {D} .",
    "i spent most of {D} at {E} with {E} .",
    "everyone at the {N} wanted to hear about {E} .",
    "the best part of the {N} was meeting {E} ."};

constexpr std::array<std::string_view, 6> kProfileSentences = {
    "i live close to {E} and work at {E} .",
    "most of my free time goes to {E} .",
    "my closest friend is {E} .",
    "i grew up near {E} .",
    "on weekends i volunteer at {E} .",
    "i keep a journal about {E} and {E} ."};

constexpr std::array<std::string_view, 8> kTaskVerbs = {"write", "draft",   "compose", "create",
                                                        "prepare", "craft", "develop", "write"};
constexpr std::array<std::string_view, 8> kTaskObjects = {"post",    "article", "speech", "note",
                                                          "story",   "summary", "letter", "update"};

template <class Array>
std::string_view pick(Rng& rng, const Array& a) {
  return a[rng.next_below(a.size())];
}

class EntitySource {
 public:
  virtual ~EntitySource() = default;
  virtual std::string_view next(Rng& rng) const = 0;
};

class PoolEntities final : public EntitySource {
 public:
  explicit PoolEntities(std::size_t pool) : pool_(pool) {}
  std::string_view next(Rng& rng) const override { return kEntities[rng.next_below(pool_)]; }

 private:
  std::size_t pool_;
};

// A user's private entities with Zipf-like weights 1/(i+1).
class UserEntities final : public EntitySource {
 public:
  explicit UserEntities(std::vector<std::string_view> entities) : entities_(std::move(entities)) {
    double total = 0;
    for (std::size_t i = 0; i < entities_.size(); ++i) total += 1.0 / static_cast<double>(i + 1);
    double acc = 0;
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      acc += 1.0 / static_cast<double>(i + 1) / total;
      cumulative_.push_back(acc);
    }
  }
  std::string_view next(Rng& rng) const override {
    double u = rng.next_double();
    for (std::size_t i = 0; i < entities_.size(); ++i)
      if (u < cumulative_[i]) return entities_[i];
    return entities_.back();
  }
  const std::vector<std::string_view>& entities() const noexcept { return entities_; }

 private:
  std::vector<std::string_view> entities_;
  std::vector<double> cumulative_;
};

std::string expand(std::string_view tmpl, Rng& rng, const EntitySource& entities) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      switch (tmpl[i + 1]) {
        case 'E': out += entities.next(rng); break;
        case 'D': out += pick(rng, kDays); break;
        case 'A': out += pick(rng, kAdjectives); break;
        case 'N': out += pick(rng, kNouns); break;
        default: out.append(tmpl.substr(i, 3));
      }
      i += 2;
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

std::string paragraph(std::size_t sentences, Rng& rng, const EntitySource& entities) {
  std::string out;
  for (std::size_t i = 0; i < sentences; ++i) {
    if (i) out += ' ';
    out += expand(pick(rng, kSentences), rng, entities);
  }
  return out;
}

}  // namespace

std::vector<CorpusRecord> synthetic_corpus(const SyntheticCorpusConfig& config) {
  if (config.entity_pool == 0 || config.entity_pool > kEntities.size())
    throw InvalidConfig("entity_pool must be in [1, " + std::to_string(kEntities.size()) + "]");
  if (config.entities_per_user == 0 || config.entities_per_user > config.entity_pool)
    throw InvalidConfig("entities_per_user must be in [1, entity_pool]");
  if (config.tasks_per_user == 0 || config.history_items == 0 || config.sentences_per_text == 0)
    throw InvalidConfig("tasks_per_user, history_items and sentences_per_text must be positive");
  if (config.tasks_per_user > kTaskVerbs.size() * kTaskObjects.size())
    throw InvalidConfig("tasks_per_user is larger than the number of distinct tasks");

  Rng rng(config.seed);
  std::vector<CorpusRecord> out;
  for (std::size_t u = 0; u < config.users; ++u) {
    std::vector<std::size_t> order(config.entity_pool);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.next_below(i + 1)]);
    std::vector<std::string_view> mine;
    for (std::size_t i = 0; i < config.entities_per_user; ++i) mine.push_back(kEntities[order[i]]);
    UserEntities entities(mine);

    char id[16];
    std::snprintf(id, sizeof id, "u%03zu", u);
    std::string profile;
    for (std::size_t i = 0; i < 3; ++i) {
      if (i) profile += ' ';
      profile += expand(pick(rng, kProfileSentences), rng, entities);
    }
    std::vector<std::string> history;
    for (std::size_t h = 0; h < config.history_items; ++h)
      history.push_back(paragraph(config.sentences_per_text, rng, entities));

    std::set<std::string> tasks;
    while (tasks.size() < config.tasks_per_user) {
      auto verb = pick(rng, kTaskVerbs);
      auto object = pick(rng, kTaskObjects);
      auto subject = entities.next(rng);
      std::string task = std::string(verb) + " a " + std::string(object) + " about my week at " + std::string(subject);
      if (!tasks.insert(task).second) continue;
      CorpusRecord r;
      r.user_id = id;
      r.dataset_kind = DatasetKind::context_aware;
      r.profile = profile;
      r.history = history;
      r.task = task;
      r.general_task = std::string(verb) + " a " + std::string(object) + " about my week";
      r.reference = paragraph(config.sentences_per_text, rng, entities);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<std::string> synthetic_general_text(std::size_t sentences, std::uint64_t seed, std::size_t entity_pool) {
  if (entity_pool == 0 || entity_pool > kEntities.size())
    throw InvalidConfig("entity_pool must be in [1, " + std::to_string(kEntities.size()) + "]");
  Rng rng(seed);
  PoolEntities entities(entity_pool);
  std::vector<std::string> out;
  out.reserve(sentences);
  for (std::size_t i = 0; i < sentences; ++i) out.push_back(expand(pick(rng, kSentences), rng, entities));
  return out;
}

}  // namespace cogen

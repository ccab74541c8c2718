#include "scene_latent/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "scene_latent/errors.h"
#include "scene_latent/random.h"

namespace scene_latent::synth {

namespace {

constexpr int kGroupSize = 26;

std::string ClassId(int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "/t/syn%03d", index);
  return buf;
}

// Keeps generated probabilities on a 1e-6 grid so the CSV stays compact and
// re-parses to the identical double.
double Quantize(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

void ValidateProfile(const SceneProfile& profile) {
  if (profile.active_class_pool.empty()) {
    throw InputError("scene '" + profile.name + "': empty class pool");
  }
  for (int c : profile.active_class_pool) {
    if (c < 0 || c >= events::kClasses) {
      throw InputError("scene '" + profile.name + "': class index out of range");
    }
  }
  if (std::set<int>(profile.active_class_pool.begin(), profile.active_class_pool.end())
          .size() != profile.active_class_pool.size()) {
    throw InputError("scene '" + profile.name + "': duplicate class in pool");
  }
  if (!(profile.events_per_second_mean > 0.0 && profile.events_per_second_mean < 20.0)) {
    throw InputError("scene '" + profile.name + "': events_per_second_mean must lie in (0, 20)");
  }
  if (!(profile.base_noise_level >= 0.0 && profile.base_noise_level < 1.0)) {
    throw InputError("scene '" + profile.name + "': base_noise_level must lie in [0, 1)");
  }
}

SyntheticCorpus GenerateCorpus(const std::vector<SceneProfile>& profiles,
                               const SynthOptions& options) {
  if (profiles.size() < 2) throw InputError("synth: need at least 2 scene profiles");
  if (options.segments_per_scene < 10) throw InputError("synth: segments_per_scene must be >= 10");
  if (!(options.gps_dropout >= 0.0 && options.gps_dropout < 1.0)) {
    throw InputError("synth: gps_dropout must lie in [0, 1)");
  }
  if (options.session_length < 1) throw InputError("synth: session_length must be >= 1");
  for (const auto& p : profiles) ValidateProfile(p);

  // Sessions of `session_length` segments cycle through the scenes.
  std::vector<int> scene_order;
  std::vector<int> produced(profiles.size(), 0);
  bool remaining = true;
  while (remaining) {
    remaining = false;
    for (size_t s = 0; s < profiles.size(); ++s) {
      const int take = std::min(options.session_length,
                                options.segments_per_scene - produced[s]);
      for (int i = 0; i < take; ++i) scene_order.push_back(static_cast<int>(s));
      produced[s] += take;
      if (produced[s] < options.segments_per_scene) remaining = true;
    }
  }

  SyntheticCorpus corpus;
  UnixSeconds t = options.start;
  int previous_scene = -1;
  for (size_t k = 0; k < scene_order.size(); ++k) {
    const int s = scene_order[k];
    const SceneProfile& profile = profiles[static_cast<size_t>(s)];
    if (previous_scene >= 0 && previous_scene != s) t += 600;  // travel between scenes
    previous_scene = s;

    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05zu", options.user_id.c_str(), k);
    RandomEngine rng(DeriveSeed(options.seed, {static_cast<std::uint64_t>(k)}));
    std::poisson_distribution<int> count_dist(profile.events_per_second_mean);

    events::EventProbMatrix m{id, events::ProbValues(events::kSeconds, events::kClasses)};
    events::BinaryValues planted = events::BinaryValues::Zero(events::kSeconds, events::kClasses);
    std::vector<int> pool = profile.active_class_pool;
    for (int sec = 0; sec < events::kSeconds; ++sec) {
      for (int c = 0; c < events::kClasses; ++c) {
        m.values(sec, c) = Quantize(Uniform(rng, 0.0, profile.base_noise_level));
      }
      const int active = std::min(count_dist(rng), static_cast<int>(pool.size()));
      for (int i = 0; i < active; ++i) {
        const auto j = static_cast<size_t>(i) +
                       static_cast<size_t>(UniformUnit(rng) * static_cast<double>(pool.size() - i));
        std::swap(pool[static_cast<size_t>(i)], pool[std::min(j, pool.size() - 1)]);
        const int cls = pool[static_cast<size_t>(i)];
        m.values(sec, cls) = Quantize(Uniform(rng, 0.9, 1.0));
        planted(sec, cls) = 1;
      }
    }

    events::SegmentEntry entry{id, options.user_id, t,
                               std::filesystem::path("matrices") / (std::string(id) + ".csv")};
    if (UniformUnit(rng) >= options.gps_dropout) {
      const geogrid::LatLon c = geogrid::HexCentroid(profile.cell, options.edge);
      geogrid::GpsFix fix;
      fix.user_id = options.user_id;
      fix.timestamp = t + static_cast<UnixSeconds>(geogrid::kSegmentSeconds / 2);
      fix.lat = c.lat + Uniform(rng, -options.edge / 20.0, options.edge / 20.0);
      fix.lon = c.lon + Uniform(rng, -options.edge / 20.0, options.edge / 20.0);
      fix.situational_label = profile.name;
      corpus.fixes.push_back(std::move(fix));
    }
    corpus.manifest.push_back(std::move(entry));
    corpus.matrices.push_back(std::move(m));
    corpus.scene_of_segment.push_back(profile.name);
    corpus.planted.push_back(std::move(planted));
    t += static_cast<UnixSeconds>(geogrid::kSegmentSeconds);
  }
  return corpus;
}

std::vector<SceneProfile> DefaultProfiles() {
  auto pool = [](int first) {
    std::vector<int> out(8);
    for (int i = 0; i < 8; ++i) out[static_cast<size_t>(i)] = first + i;
    return out;
  };
  return {
      SceneProfile{"home", pool(0), 5.0, 0.3, geogrid::HexCoord{0, 0}},
      SceneProfile{"work", pool(2 * kGroupSize), 5.0, 0.3, geogrid::HexCoord{12, -3}},
      SceneProfile{"metro", pool(4 * kGroupSize), 5.0, 0.3, geogrid::HexCoord{-5, 9}},
  };
}

std::vector<SceneProfile> LoadProfiles(const std::filesystem::path& path,
                                       std::string* user_id) {
  Json doc;
  try {
    doc = Json::parse(ReadFile(path));
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    const Json* list = &doc;
    if (doc.is_object()) {
      if (user_id != nullptr && doc.contains("user_id")) {
        *user_id = doc.at("user_id").get<std::string>();
      }
      list = &doc.at("profiles");
    }
    std::vector<SceneProfile> profiles;
    for (const Json& obj : *list) {
      SceneProfile p;
      p.name = obj.at("name").get<std::string>();
      p.active_class_pool = obj.at("active_class_pool").get<std::vector<int>>();
      p.events_per_second_mean = obj.value("events_per_second_mean", 5.0);
      p.base_noise_level = obj.value("base_noise_level", 0.3);
      if (obj.contains("cell")) {
        p.cell = geogrid::HexCoord{obj.at("cell").at("q").get<std::int64_t>(),
                                   obj.at("cell").at("r").get<std::int64_t>()};
      }
      ValidateProfile(p);
      profiles.push_back(std::move(p));
    }
    return profiles;
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": bad scene profile: " + e.what());
  }
}

events::EventVocabulary SyntheticVocabulary() {
  std::vector<events::VocabEntry> entries;
  for (int i = 0; i < events::kClasses; ++i) {
    entries.push_back({i, ClassId(i), "Synthetic class " + std::to_string(i)});
  }
  return events::EventVocabulary(std::move(entries));
}

std::string SyntheticOntologyJson() {
  Json doc = Json::array();
  const int groups = (events::kClasses + kGroupSize - 1) / kGroupSize;
  Json root{{"id", "/t/root"}, {"name", "Synthetic root"}, {"child_ids", Json::array()}};
  for (int g = 0; g < groups; ++g) root["child_ids"].push_back("/t/group" + std::to_string(g));
  doc.push_back(root);
  for (int g = 0; g < groups; ++g) {
    Json group{{"id", "/t/group" + std::to_string(g)},
               {"name", "Synthetic group " + std::to_string(g)},
               {"child_ids", Json::array()}};
    for (int c = g * kGroupSize; c < std::min(events::kClasses, (g + 1) * kGroupSize); ++c) {
      group["child_ids"].push_back(ClassId(c));
    }
    doc.push_back(group);
  }
  for (int c = 0; c < events::kClasses; ++c) {
    doc.push_back(Json{{"id", ClassId(c)},
                       {"name", "Synthetic class " + std::to_string(c)},
                       {"child_ids", Json::array()}});
  }
  return doc.dump(1) + "\n";
}

void WriteCorpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "matrices");
  for (size_t i = 0; i < corpus.matrices.size(); ++i) {
    WriteFile(dir / corpus.manifest[i].matrix_path, events::ProbMatrixToCsv(corpus.matrices[i]));
  }
  WriteFile(dir / "manifest.jsonl", events::ManifestToJsonLines(corpus.manifest, {}));

  std::string fixes;
  for (const auto& f : corpus.fixes) {
    Json obj{{"user_id", f.user_id},
             {"timestamp", FormatIso8601(f.timestamp)},
             {"lat", f.lat},
             {"lon", f.lon}};
    if (f.situational_label) obj["situational_label"] = *f.situational_label;
    fixes += obj.dump() + "\n";
  }
  WriteFile(dir / "fixes.jsonl", fixes);

  std::string truth = "segment_id,scene\n";
  for (size_t i = 0; i < corpus.manifest.size(); ++i) {
    truth += corpus.manifest[i].segment_id + "," + QuoteCsvField(corpus.scene_of_segment[i]) + "\n";
  }
  WriteFile(dir / "ground_truth.csv", truth);
  WriteFile(dir / "vocab.csv", SyntheticVocabulary().ToCsv());
  WriteFile(dir / "ontology.json", SyntheticOntologyJson());
}

}  // namespace scene_latent::synth

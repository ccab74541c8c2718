#include "scene_latent/ontology.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "scene_latent/errors.h"
#include "scene_latent/random.h"

namespace scene_latent::ontology {

OntologyGraph::OntologyGraph(std::vector<Node> nodes,
                             const std::vector<std::pair<int, int>>& edges)
    : nodes_(std::move(nodes)), adjacency_(nodes_.size()) {
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, static_cast<int>(i)).second) {
      throw ValidationError("duplicate ontology node id: " + nodes_[i].id);
    }
  }
  std::set<std::pair<int, int>> unique;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= static_cast<int>(nodes_.size()) ||
        b >= static_cast<int>(nodes_.size())) {
      throw ValidationError("edge endpoint out of range");
    }
    if (a == b) continue;
    unique.emplace(std::min(a, b), std::max(a, b));
  }
  for (auto [a, b] : unique) {
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
  num_edges_ = unique.size();
}

bool OntologyGraph::adjacent(int a, int b) const {
  const auto& list = adjacency_[a];
  return std::binary_search(list.begin(), list.end(), b);
}

int OntologyGraph::index_of(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

OntologyGraph ParseOntology(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("ontology: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("ontology: expected a JSON array");

  std::vector<Node> nodes;
  std::vector<std::vector<std::string>> children;
  std::unordered_map<std::string, int> index;
  try {
    for (const Json& obj : doc) {
      Node node{obj.at("id").get<std::string>(), obj.value("name", std::string())};
      index.emplace(node.id, static_cast<int>(nodes.size()));
      children.push_back(obj.value("child_ids", std::vector<std::string>{}));
      nodes.push_back(std::move(node));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("ontology: ") + e.what());
  }

  std::vector<std::pair<int, int>> edges;
  std::vector<std::string> dangling;
  for (size_t parent = 0; parent < nodes.size(); ++parent) {
    for (const std::string& child : children[parent]) {
      auto it = index.find(child);
      if (it == index.end()) {
        dangling.push_back(nodes[parent].id + " -> " + child);
        continue;
      }
      edges.emplace_back(static_cast<int>(parent), it->second);
    }
  }
  if (!dangling.empty()) {
    std::string msg = "ontology: dangling child ids:";
    for (const auto& d : dangling) msg += " " + d + ";";
    throw ValidationError(msg);
  }
  return OntologyGraph(std::move(nodes), edges);
}

OntologyGraph LoadOntology(const std::filesystem::path& path) {
  return ParseOntology(ReadFile(path));
}

std::vector<Transition> TransitionWeights(const OntologyGraph& graph, int prev,
                                          int curr, double p, double q) {
  if (!(p > 0.0) || !(q > 0.0)) throw InputError("node2vec p and q must be positive");
  const auto& nbrs = graph.neighbors(curr);
  std::vector<Transition> out;
  out.reserve(nbrs.size());
  double total = 0.0;
  for (int n : nbrs) {
    double w = 1.0;
    if (prev >= 0) {
      if (n == prev) {
        w = 1.0 / p;
      } else if (!graph.adjacent(n, prev)) {
        w = 1.0 / q;
      }
    }
    out.push_back({n, w});
    total += w;
  }
  for (auto& t : out) t.probability /= total;
  return out;
}

std::vector<Walk> GenerateWalks(const OntologyGraph& graph, double p, double q,
                                int walk_length, int walks_per_node,
                                std::uint64_t seed) {
  if (walk_length < 1 || walks_per_node < 1) {
    throw InputError("walk_length and walks_per_node must be positive");
  }
  const int n = static_cast<int>(graph.num_nodes());
  std::vector<Walk> walks;
  walks.reserve(static_cast<size_t>(n) * walks_per_node);
  for (int round = 0; round < walks_per_node; ++round) {
    for (int start = 0; start < n; ++start) {
      RandomEngine rng(DeriveSeed(seed, {static_cast<std::uint64_t>(start),
                                         static_cast<std::uint64_t>(round)}));
      Walk walk{start};
      walk.reserve(walk_length);
      while (static_cast<int>(walk.size()) < walk_length) {
        const int curr = walk.back();
        const int prev = walk.size() > 1 ? walk[walk.size() - 2] : -1;
        const auto dist = TransitionWeights(graph, prev, curr, p, q);
        if (dist.empty()) break;
        const double u = UniformUnit(rng);
        double acc = 0.0;
        int next = dist.back().node;
        for (const auto& t : dist) {
          acc += t.probability;
          if (u < acc) {
            next = t.node;
            break;
          }
        }
        walk.push_back(next);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

namespace {

// -ln sigmoid(x), stable for large |x|.
double NegLogSigmoid(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

}  // namespace

NodeEmbeddings TrainSkipGram(std::span<const Walk> corpus, int num_nodes,
                             const Node2VecConfig& cfg, std::uint64_t seed) {
  if (corpus.empty()) throw InputError("skip-gram: empty walk corpus");
  if (cfg.window < 1 || cfg.negatives < 1 || cfg.dim < 1 || cfg.epochs < 1) {
    throw InputError("skip-gram: window, negatives, dim and epochs must be >= 1");
  }
  RandomEngine rng(DeriveSeed(seed, {0x5347ULL}));

  const int dim = cfg.dim;
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatrix input(num_nodes, dim);
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    input.data()[i] = (UniformUnit(rng) - 0.5) / dim;
  }
  RowMatrix context = RowMatrix::Zero(num_nodes, dim);

  std::vector<double> counts(num_nodes, 0.0);
  std::uint64_t pairs_per_epoch = 0;
  for (const Walk& walk : corpus) {
    const int len = static_cast<int>(walk.size());
    for (int i = 0; i < len; ++i) {
      counts.at(walk[i]) += 1.0;
      const int lo = std::max(0, i - cfg.window);
      const int hi = std::min(len - 1, i + cfg.window);
      pairs_per_epoch += static_cast<std::uint64_t>(hi - lo);
    }
  }
  if (pairs_per_epoch == 0) throw InputError("skip-gram: corpus has no context pairs");

  std::vector<double> cumulative(num_nodes);
  double acc = 0.0;
  for (int i = 0; i < num_nodes; ++i) {
    acc += std::pow(counts[i], 0.75);
    cumulative[i] = acc;
  }
  auto sample_negative = [&]() {
    const double u = UniformUnit(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<int>(it - cumulative.begin());
  };

  NodeEmbeddings emb;
  const double total_pairs = static_cast<double>(pairs_per_epoch) * cfg.epochs;
  double processed = 0.0;
  std::vector<double> grad_in(static_cast<size_t>(dim));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    for (const Walk& walk : corpus) {
      const int len = static_cast<int>(walk.size());
      for (int i = 0; i < len; ++i) {
        const int center = walk[i];
        const int lo = std::max(0, i - cfg.window);
        const int hi = std::min(len - 1, i + cfg.window);
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const int target = walk[j];
          const double lr = std::max(cfg.min_learning_rate,
                                     cfg.learning_rate * (1.0 - processed / total_pairs));
          processed += 1.0;
          double* v = input.row(center).data();
          std::fill(grad_in.begin(), grad_in.end(), 0.0);

          auto update = [&](int node, bool positive) {
            double* u = context.row(node).data();
            double score = 0.0;
            for (int d = 0; d < dim; ++d) score += u[d] * v[d];
            // -log sigmoid(s) = log1p(e^-s); -log sigmoid(-s) = s + log1p(e^-s)
            const double e = std::exp(-score);
            const double l = std::log1p(e);
            loss += positive ? l : score + l;
            const double g = ((positive ? 1.0 : 0.0) - 1.0 / (1.0 + e)) * lr;
            for (int d = 0; d < dim; ++d) {
              grad_in[static_cast<size_t>(d)] += g * u[d];
              u[d] += g * v[d];
            }
          };
          update(target, true);
          for (int k = 0; k < cfg.negatives; ++k) {
            const int neg = sample_negative();
            if (neg == target || neg == center) continue;
            update(neg, false);
          }
          for (int d = 0; d < dim; ++d) v[d] += grad_in[static_cast<size_t>(d)];
        }
      }
    }
    emb.epoch_loss.push_back(loss / static_cast<double>(pairs_per_epoch));
  }
  emb.input = input;
  emb.context = context;
  return emb;
}

double PairLoss(const NodeEmbeddings& emb, int center, int context) {
  return NegLogSigmoid(emb.context.row(context).dot(emb.input.row(center)));
}

Eigen::MatrixXd ClassMatrix(const NodeEmbeddings& emb, const OntologyGraph& graph,
                            const events::EventVocabulary& vocab) {
  Eigen::MatrixXd out(emb.input.cols(), static_cast<Eigen::Index>(vocab.size()));
  std::vector<std::string> missing;
  for (size_t c = 0; c < vocab.size(); ++c) {
    const int node = graph.index_of(vocab[c].class_id);
    if (node < 0) {
      missing.push_back(vocab[c].class_id);
      continue;
    }
    out.col(static_cast<Eigen::Index>(c)) = emb.input.row(node).transpose();
  }
  if (!missing.empty()) {
    std::string msg = "vocabulary classes missing from the ontology:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  return out;
}

NodeEmbeddings Node2Vec(const OntologyGraph& graph, const Node2VecConfig& cfg,
                        std::uint64_t seed) {
  const auto walks =
      GenerateWalks(graph, cfg.p, cfg.q, cfg.walk_length, cfg.walks_per_node, seed);
  return TrainSkipGram(walks, static_cast<int>(graph.num_nodes()), cfg, seed);
}

std::string EmbeddingsToCsv(const NodeEmbeddings& emb, const OntologyGraph& graph) {
  std::string out = "node_id";
  for (Eigen::Index d = 0; d < emb.input.cols(); ++d) out += ",e" + std::to_string(d);
  out += '\n';
  for (size_t i = 0; i < graph.num_nodes(); ++i) {
    out += QuoteCsvField(graph.nodes()[i].id);
    for (Eigen::Index d = 0; d < emb.input.cols(); ++d) {
      out += ',';
      out += FormatDouble(emb.input(static_cast<Eigen::Index>(i), d));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd LoadClassMatrix(const std::filesystem::path& path,
                                const events::EventVocabulary& vocab) {
  const std::string text = ReadFile(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  const size_t dim = ParseCsvRecord(line).size() - 1;
  if (dim == 0) throw ParseError(path.string() + ": no embedding columns");
  std::unordered_map<std::string, Eigen::VectorXd> rows;
  while (std::getline(in, line)) {
    if (TrimLine(line).empty()) continue;
    const auto fields = ParseCsvRecord(line);
    if (fields.size() != dim + 1) throw ShapeError(path.string() + ": ragged row");
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (size_t d = 0; d < dim; ++d) {
      v(static_cast<Eigen::Index>(d)) = ParseDouble(fields[d + 1], path.string());
    }
    rows.emplace(fields[0], std::move(v));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(vocab.size()));
  std::vector<std::string> missing;
  for (size_t c = 0; c < vocab.size(); ++c) {
    auto it = rows.find(vocab[c].class_id);
    if (it == rows.end()) {
      missing.push_back(vocab[c].class_id);
      continue;
    }
    out.col(static_cast<Eigen::Index>(c)) = it->second;
  }
  if (!missing.empty()) {
    std::string msg = "vocabulary classes missing from embeddings:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  return out;
}

}  // namespace scene_latent::ontology

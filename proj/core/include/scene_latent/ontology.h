#ifndef SCENE_LATENT_ONTOLOGY_H_
#define SCENE_LATENT_ONTOLOGY_H_

// Sound-ontology graph and Node2Vec embeddings of its nodes: second-order
// biased random walks followed by skip-gram with negative sampling.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scene_latent/events.h"

namespace scene_latent::ontology {

inline constexpr int kEmbeddingDim = 5;

struct Node {
  std::string id;
  std::string name;
};

// Undirected, simple graph. Node order is the order of the source file and
// adjacency lists are sorted by node index.
class OntologyGraph {
 public:
  OntologyGraph() = default;
  OntologyGraph(std::vector<Node> nodes,
                const std::vector<std::pair<int, int>>& edges);

  size_t num_nodes() const { return nodes_.size(); }
  size_t num_edges() const { return num_edges_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& neighbors(int node) const { return adjacency_[node]; }
  bool adjacent(int a, int b) const;
  // -1 when absent.
  int index_of(const std::string& id) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<int>> adjacency_;
  std::unordered_map<std::string, int> index_;
  size_t num_edges_ = 0;
};

// Parses the published ontology schema: a JSON array of objects carrying
// `id`, `name` and `child_ids`. Dangling child ids raise ValidationError.
OntologyGraph ParseOntology(std::string_view json_text);
OntologyGraph LoadOntology(const std::filesystem::path& path);

struct Node2VecConfig {
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  int walk_length = 20;
  int walks_per_node = 40;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 1e-4;
  int dim = kEmbeddingDim;
};

struct Transition {
  int node = 0;
  double probability = 0.0;
};

// Distribution over the neighbours of `curr`. `prev` < 0 marks the first
// step of a walk, which is uniform.
std::vector<Transition> TransitionWeights(const OntologyGraph& graph, int prev,
                                          int curr, double p, double q);

using Walk = std::vector<int>;

// Rounds of one walk per node; walk k from node i draws from a stream seeded
// by (seed, i, k).
std::vector<Walk> GenerateWalks(const OntologyGraph& graph, double p, double q,
                                int walk_length, int walks_per_node,
                                std::uint64_t seed);

struct NodeEmbeddings {
  Eigen::MatrixXd input;    // num_nodes x dim
  Eigen::MatrixXd context;  // num_nodes x dim
  std::vector<double> epoch_loss;  // mean pair loss per epoch
};

// Skip-gram with negative sampling; negatives come from the unigram
// distribution of the walk corpus raised to 0.75. A negative equal to the
// center or to the positive context is skipped.
NodeEmbeddings TrainSkipGram(std::span<const Walk> corpus, int num_nodes,
                             const Node2VecConfig& cfg, std::uint64_t seed);

// Negative-sampling loss of one (center, context) pair without negatives:
// -ln sigmoid(context . input).
double PairLoss(const NodeEmbeddings& emb, int center, int context);

// dim x num_classes; column c is the input vector of vocabulary class c.
Eigen::MatrixXd ClassMatrix(const NodeEmbeddings& emb, const OntologyGraph& graph,
                            const events::EventVocabulary& vocab);

NodeEmbeddings Node2Vec(const OntologyGraph& graph, const Node2VecConfig& cfg,
                        std::uint64_t seed);

// CSV: node_id,e0,...,e{dim-1}
std::string EmbeddingsToCsv(const NodeEmbeddings& emb, const OntologyGraph& graph);
// Reads the CSV above back and builds the class matrix for `vocab`.
Eigen::MatrixXd LoadClassMatrix(const std::filesystem::path& path,
                                const events::EventVocabulary& vocab);

}  // namespace scene_latent::ontology

#endif  // SCENE_LATENT_ONTOLOGY_H_

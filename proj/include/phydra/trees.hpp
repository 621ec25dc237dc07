#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace phydra {

struct TreeNode {
    int parent = -1;
    std::vector<int> children;
    double length = 0.0;  // branch above this node; 0 for an unlengthed root
    std::string label;    // non-empty for tips; optional for internal nodes

    bool is_tip() const { return children.empty(); }
};

// Rooted tree with branch lengths. Immutable after construction; every
// manipulation below returns a new tree.
class PhyloTree {
  public:
    PhyloTree(std::vector<TreeNode> nodes, int root);

    int root() const { return root_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    const TreeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

    // Children strictly before parents; root last.
    const std::vector<int>& postorder() const { return postorder_; }
    const std::vector<int>& tips() const { return tips_; }
    int tip_count() const { return static_cast<int>(tips_.size()); }
    std::vector<std::string> tip_labels() const;

    // Index of the tip carrying this label, or -1.
    int find_tip(const std::string& label) const;

    // Sum of branch lengths on the root-to-node path (the root's own length
    // is not part of any such path).
    double node_depth(int i) const;

  private:
    std::vector<TreeNode> nodes_;
    int root_;
    std::vector<int> postorder_;
    std::vector<int> tips_;
    std::unordered_map<std::string, int> tip_lookup_;
};

// Ordered collection of trees over one taxon set (e.g. a posterior sample).
struct TreeSample {
    std::vector<PhyloTree> trees;
    std::string source;
};

// Throws if the trees do not share an identical tip label set.
TreeSample make_tree_sample(std::vector<PhyloTree> trees, std::string source);

PhyloTree parse_newick(const std::string& text);
std::string serialize_newick(const PhyloTree& tree);

// Inserts a node on the sibling tip's branch at split_fraction of its length
// below the parent and hangs the new tip there, at the sibling's depth.
PhyloTree graft_taxon(const PhyloTree& tree, const std::string& new_taxon,
                      const std::string& sibling, double split_fraction = 0.5);

// Induced subtree on the kept tips; suppressed degree-2 nodes have their
// branch lengths summed.
PhyloTree prune_to_taxa(const PhyloTree& tree, const std::vector<std::string>& keep);

// Standard Kingman coalescent with unit effective population size: with k
// lineages extant, a merge happens after Exponential(k(k-1)/2) time between
// a uniformly chosen pair. Tips are labeled t1..tN.
PhyloTree simulate_coalescent(int n_taxa, std::uint64_t seed);

// One Newick tree per line; blank lines and lines starting with '#' skipped.
std::vector<PhyloTree> read_tree_file(const std::string& path);
void write_tree_file(const std::string& path, const std::vector<PhyloTree>& trees);

// Clade -> branch length map keyed by the sorted tip labels under each node;
// the basis for topology-insensitive comparison.
std::map<std::vector<std::string>, double> clade_lengths(const PhyloTree& tree);

// Equality up to node renaming/reordering, with tolerance on branch lengths.
bool trees_equal(const PhyloTree& a, const PhyloTree& b, double tol = 1e-12);

// Pairwise tip-to-tip path lengths, rows/cols following `order`.
std::vector<std::vector<double>> tip_distance_matrix(const PhyloTree& tree,
                                                     const std::vector<std::string>& order);

}  // namespace phydra

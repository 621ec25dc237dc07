#include "phydra/trees.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "phydra/common.hpp"
#include "phydra/csv.hpp"
#include "phydra/rng.hpp"

namespace phydra {

PhyloTree::PhyloTree(std::vector<TreeNode> nodes, int root)
    : nodes_(std::move(nodes)), root_(root) {
    const int n = node_count();
    if (n == 0) throw std::invalid_argument("tree has no nodes");
    if (root_ < 0 || root_ >= n) throw std::invalid_argument("root index out of range");
    if (nodes_[static_cast<std::size_t>(root_)].parent != -1)
        throw std::invalid_argument("root must have no parent");

    for (int i = 0; i < n; ++i) {
        const TreeNode& nd = nodes_[static_cast<std::size_t>(i)];
        if (i != root_ && (nd.parent < 0 || nd.parent >= n))
            throw std::invalid_argument("non-root node lacks a valid parent");
        if (!(nd.length >= 0.0)) throw std::invalid_argument("negative branch length");
        for (int c : nd.children) {
            if (c < 0 || c >= n || nodes_[static_cast<std::size_t>(c)].parent != i)
                throw std::invalid_argument("parent/child links inconsistent");
        }
    }

    // Iterative postorder; also detects disconnected nodes and cycles.
    postorder_.reserve(static_cast<std::size_t>(n));
    std::vector<std::pair<int, std::size_t>> stack;
    stack.emplace_back(root_, 0);
    while (!stack.empty()) {
        auto& [v, next_child] = stack.back();
        const auto& kids = nodes_[static_cast<std::size_t>(v)].children;
        if (next_child < kids.size()) {
            int c = kids[next_child++];
            stack.emplace_back(c, 0);
            if (stack.size() > nodes_.size()) throw std::invalid_argument("cycle in tree");
        } else {
            postorder_.push_back(v);
            stack.pop_back();
        }
    }
    if (postorder_.size() != nodes_.size())
        throw std::invalid_argument("tree is not fully connected");

    for (int v : postorder_) {
        const TreeNode& nd = nodes_[static_cast<std::size_t>(v)];
        if (!nd.is_tip()) continue;
        if (nd.label.empty()) throw std::invalid_argument("tip without a label");
        if (!tip_lookup_.emplace(nd.label, v).second)
            throw std::invalid_argument("duplicate tip label: " + nd.label);
        tips_.push_back(v);
    }
}

std::vector<std::string> PhyloTree::tip_labels() const {
    std::vector<std::string> out;
    out.reserve(tips_.size());
    for (int v : tips_) out.push_back(nodes_[static_cast<std::size_t>(v)].label);
    return out;
}

int PhyloTree::find_tip(const std::string& label) const {
    auto it = tip_lookup_.find(label);
    return it == tip_lookup_.end() ? -1 : it->second;
}

double PhyloTree::node_depth(int i) const {
    double d = 0.0;
    while (i != root_) {
        d += nodes_[static_cast<std::size_t>(i)].length;
        i = nodes_[static_cast<std::size_t>(i)].parent;
    }
    return d;
}

TreeSample make_tree_sample(std::vector<PhyloTree> trees, std::string source) {
    if (trees.empty()) throw std::invalid_argument("empty tree sample");
    auto reference = trees.front().tip_labels();
    std::sort(reference.begin(), reference.end());
    for (std::size_t i = 1; i < trees.size(); ++i) {
        auto labels = trees[i].tip_labels();
        std::sort(labels.begin(), labels.end());
        if (labels != reference)
            throw std::invalid_argument("tree " + std::to_string(i + 1) +
                                        " has a different taxon set than tree 1");
    }
    return TreeSample{std::move(trees), std::move(source)};
}

namespace {

class NewickParser {
  public:
    explicit NewickParser(const std::string& text) : text_(text) {}

    PhyloTree parse() {
        skip_space();
        int root = parse_subtree();
        skip_space();
        if (peek() != ';') fail("expected ';'");
        ++pos_;
        skip_space();
        if (pos_ != text_.size()) fail("trailing characters after ';'");
        return PhyloTree(std::move(nodes_), root);
    }

  private:
    const std::string& text_;
    std::size_t pos_ = 0;
    std::vector<TreeNode> nodes_;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                       text_[pos_] == '\n' || text_[pos_] == '\r'))
            ++pos_;
    }

    int new_node() {
        nodes_.emplace_back();
        return static_cast<int>(nodes_.size()) - 1;
    }

    int parse_subtree() {
        skip_space();
        int v;
        if (peek() == '(') {
            ++pos_;
            v = new_node();
            while (true) {
                int child = parse_subtree();
                nodes_[static_cast<std::size_t>(child)].parent = v;
                nodes_[static_cast<std::size_t>(v)].children.push_back(child);
                skip_space();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                if (peek() == ')') {
                    ++pos_;
                    break;
                }
                fail("expected ',' or ')'");
            }
            skip_space();
            nodes_[static_cast<std::size_t>(v)].label = parse_label(true);
        } else {
            v = new_node();
            nodes_[static_cast<std::size_t>(v)].label = parse_label(false);
        }
        skip_space();
        if (peek() == ':') {
            ++pos_;
            nodes_[static_cast<std::size_t>(v)].length = parse_length();
        }
        return v;
    }

    std::string parse_label(bool optional) {
        skip_space();
        if (peek() == '\'') {
            ++pos_;
            std::string out;
            while (true) {
                if (pos_ >= text_.size()) fail("unterminated quoted label");
                char c = text_[pos_++];
                if (c == '\'') {
                    if (peek() == '\'') {  // doubled quote = literal quote
                        out += '\'';
                        ++pos_;
                    } else {
                        break;
                    }
                } else {
                    out += c;
                }
            }
            return out;
        }
        std::string out;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == ' ' ||
                c == '\t' || c == '\n' || c == '\r')
                break;
            out += c;
            ++pos_;
        }
        if (out.empty() && !optional) fail("expected a taxon label");
        return out;
    }

    double parse_length() {
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if ((c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+' || c == 'e' ||
                c == 'E')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) fail("expected a branch length after ':'");
        double len;
        try {
            len = parse_double(text_.substr(start, pos_ - start));
        } catch (const std::exception&) {
            pos_ = start;
            fail("malformed branch length");
        }
        if (len < 0.0) {
            pos_ = start;
            fail("negative branch length");
        }
        return len;
    }
};

bool label_needs_quoting(const std::string& label) {
    return label.find_first_of("(),:;' \t\n\r") != std::string::npos;
}

void serialize_node(const PhyloTree& tree, int v, bool emit_length, std::string& out) {
    const TreeNode& nd = tree.node(v);
    if (!nd.is_tip()) {
        out += '(';
        for (std::size_t i = 0; i < nd.children.size(); ++i) {
            if (i) out += ',';
            serialize_node(tree, nd.children[i], true, out);
        }
        out += ')';
    }
    if (!nd.label.empty()) {
        if (label_needs_quoting(nd.label)) {
            out += '\'';
            for (char c : nd.label) {
                if (c == '\'') out += '\'';
                out += c;
            }
            out += '\'';
        } else {
            out += nd.label;
        }
    }
    if (emit_length) {
        out += ':';
        out += format_double(nd.length);
    }
}

}  // namespace

PhyloTree parse_newick(const std::string& text) { return NewickParser(text).parse(); }

std::string serialize_newick(const PhyloTree& tree) {
    std::string out;
    serialize_node(tree, tree.root(), tree.node(tree.root()).length > 0.0, out);
    out += ';';
    return out;
}

PhyloTree graft_taxon(const PhyloTree& tree, const std::string& new_taxon,
                      const std::string& sibling, double split_fraction) {
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw std::invalid_argument("split_fraction must lie in (0,1)");
    int sib = tree.find_tip(sibling);
    if (sib < 0) throw std::invalid_argument("unknown sibling tip: " + sibling);
    if (tree.find_tip(new_taxon) >= 0)
        throw std::invalid_argument("taxon already present: " + new_taxon);
    if (sib == tree.root()) throw std::invalid_argument("cannot graft beside the root");

    std::vector<TreeNode> nodes;
    nodes.reserve(static_cast<std::size_t>(tree.node_count()) + 2);
    for (int i = 0; i < tree.node_count(); ++i) nodes.push_back(tree.node(i));

    const double sib_len = nodes[static_cast<std::size_t>(sib)].length;
    const int parent = nodes[static_cast<std::size_t>(sib)].parent;
    const double upper = split_fraction * sib_len;
    const double lower = sib_len - upper;

    int join = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(join)].parent = parent;
    nodes[static_cast<std::size_t>(join)].length = upper;

    int tip = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(tip)].parent = join;
    nodes[static_cast<std::size_t>(tip)].length = lower;  // matches the sibling's depth
    nodes[static_cast<std::size_t>(tip)].label = new_taxon;

    for (int& c : nodes[static_cast<std::size_t>(parent)].children)
        if (c == sib) c = join;
    nodes[static_cast<std::size_t>(sib)].parent = join;
    nodes[static_cast<std::size_t>(sib)].length = lower;
    nodes[static_cast<std::size_t>(join)].children = {sib, tip};

    return PhyloTree(std::move(nodes), tree.root());
}

PhyloTree prune_to_taxa(const PhyloTree& tree, const std::vector<std::string>& keep) {
    if (keep.size() < 2) throw std::invalid_argument("need at least 2 taxa to keep");
    std::vector<char> kept(static_cast<std::size_t>(tree.node_count()), 0);
    for (const auto& label : keep) {
        int v = tree.find_tip(label);
        if (v < 0) throw std::invalid_argument("unknown tip label: " + label);
        kept[static_cast<std::size_t>(v)] = 1;
    }

    // Number of kept tips below (or at) each node.
    std::vector<int> survivors(static_cast<std::size_t>(tree.node_count()), 0);
    for (int v : tree.postorder()) {
        const TreeNode& nd = tree.node(v);
        if (nd.is_tip()) {
            survivors[static_cast<std::size_t>(v)] = kept[static_cast<std::size_t>(v)];
        } else {
            for (int c : nd.children)
                survivors[static_cast<std::size_t>(v)] += survivors[static_cast<std::size_t>(c)];
        }
    }

    std::vector<TreeNode> nodes;
    // Copies the induced subtree, accumulating lengths across suppressed
    // single-child chains; returns the new index.
    auto build = [&](auto&& self, int v, int new_parent, double carried) -> int {
        const TreeNode& nd = tree.node(v);
        if (nd.is_tip()) {
            int idx = static_cast<int>(nodes.size());
            nodes.emplace_back();
            nodes[static_cast<std::size_t>(idx)].parent = new_parent;
            nodes[static_cast<std::size_t>(idx)].length = carried + nd.length;
            nodes[static_cast<std::size_t>(idx)].label = nd.label;
            return idx;
        }
        std::vector<int> live;
        for (int c : nd.children)
            if (survivors[static_cast<std::size_t>(c)] > 0) live.push_back(c);
        if (live.size() == 1) return self(self, live[0], new_parent, carried + nd.length);
        int idx = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(idx)].parent = new_parent;
        nodes[static_cast<std::size_t>(idx)].length = carried + nd.length;
        nodes[static_cast<std::size_t>(idx)].label = nd.label;
        for (int c : live) {
            int child_idx = self(self, c, idx, 0.0);
            nodes[static_cast<std::size_t>(idx)].children.push_back(child_idx);
        }
        return idx;
    };
    int root = build(build, tree.root(), -1, 0.0);
    return PhyloTree(std::move(nodes), root);
}

PhyloTree simulate_coalescent(int n_taxa, std::uint64_t seed) {
    if (n_taxa < 2) throw std::invalid_argument("coalescent needs at least 2 taxa");
    Rng rng(seed);

    std::vector<TreeNode> nodes;
    std::vector<int> active;
    std::vector<double> age;  // time of each node, tips at 0
    for (int i = 0; i < n_taxa; ++i) {
        nodes.emplace_back();
        nodes.back().label = "t" + std::to_string(i + 1);
        active.push_back(i);
        age.push_back(0.0);
    }

    double now = 0.0;
    while (active.size() > 1) {
        const auto k = static_cast<double>(active.size());
        now += rng.exponential(k * (k - 1.0) / 2.0);

        std::size_t i = rng.integer(active.size());
        std::size_t j = rng.integer(active.size() - 1);
        if (j >= i) ++j;
        if (i > j) std::swap(i, j);

        int a = active[i], b = active[j];
        int parent = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(parent)].children = {a, b};
        nodes[static_cast<std::size_t>(a)].parent = parent;
        nodes[static_cast<std::size_t>(a)].length = now - age[static_cast<std::size_t>(a)];
        nodes[static_cast<std::size_t>(b)].parent = parent;
        nodes[static_cast<std::size_t>(b)].length = now - age[static_cast<std::size_t>(b)];
        age.push_back(now);

        active.erase(active.begin() + static_cast<std::ptrdiff_t>(j));
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(i));
        active.push_back(parent);
    }
    return PhyloTree(std::move(nodes), active[0]);
}

std::vector<PhyloTree> read_tree_file(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::vector<PhyloTree> trees;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        try {
            trees.push_back(parse_newick(line));
        } catch (const ParseError& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (trees.empty()) throw std::runtime_error(path + ": no trees found");
    return trees;
}

void write_tree_file(const std::string& path, const std::vector<PhyloTree>& trees) {
    std::string out;
    for (const auto& t : trees) {
        out += serialize_newick(t);
        out += '\n';
    }
    write_text_file(path, out);
}

std::map<std::vector<std::string>, double> clade_lengths(const PhyloTree& tree) {
    std::vector<std::vector<std::string>> below(static_cast<std::size_t>(tree.node_count()));
    std::map<std::vector<std::string>, double> out;
    for (int v : tree.postorder()) {
        const TreeNode& nd = tree.node(v);
        auto& labels = below[static_cast<std::size_t>(v)];
        if (nd.is_tip()) {
            labels.push_back(nd.label);
        } else {
            for (int c : nd.children) {
                const auto& sub = below[static_cast<std::size_t>(c)];
                labels.insert(labels.end(), sub.begin(), sub.end());
            }
            std::sort(labels.begin(), labels.end());
        }
        out[labels] = nd.length;
    }
    return out;
}

bool trees_equal(const PhyloTree& a, const PhyloTree& b, double tol) {
    auto ca = clade_lengths(a);
    auto cb = clade_lengths(b);
    if (ca.size() != cb.size()) return false;
    for (const auto& [clade, len] : ca) {
        auto it = cb.find(clade);
        if (it == cb.end()) return false;
        if (std::fabs(len - it->second) > tol) return false;
    }
    return true;
}

std::vector<std::vector<double>> tip_distance_matrix(const PhyloTree& tree,
                                                     const std::vector<std::string>& order) {
    const std::size_t n = order.size();
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = tree.find_tip(order[i]);
        if (idx[i] < 0) throw std::invalid_argument("unknown tip label: " + order[i]);
    }
    // Path length via depths and the most recent common ancestor.
    auto ancestors = [&](int v) {
        std::vector<int> chain;
        while (v != -1) {
            chain.push_back(v);
            v = tree.node(v).parent;
        }
        return chain;
    };
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        auto ai = ancestors(idx[i]);
        std::set<int> seen(ai.begin(), ai.end());
        for (std::size_t j = i + 1; j < n; ++j) {
            int v = idx[j];
            while (seen.find(v) == seen.end()) v = tree.node(v).parent;
            double dist = tree.node_depth(idx[i]) + tree.node_depth(idx[j]) -
                          2.0 * tree.node_depth(v);
            d[i][j] = d[j][i] = dist;
        }
    }
    return d;
}

}  // namespace phydra

#include "tomo/stats.hpp"

#include <bit>
#include <mutex>
#include <unordered_map>

#include "json.hpp"

namespace tomo {

Subset Subset::of_children(const Topology& topo, NodeId node,
                           const std::vector<NodeId>& members) {
  const auto& kids = topo.children(node);
  if (kids.empty()) {
    throw Error("node " + std::to_string(node) + " has no children");
  }
  Subset x{node, 0};
  for (NodeId m : members) {
    std::size_t pos = kids.size();
    for (std::size_t p = 0; p < kids.size(); ++p) {
      if (kids[p] == m) {
        pos = p;
        break;
      }
    }
    if (pos == kids.size()) {
      throw Error("node " + std::to_string(m) + " is not a child of node " +
                  std::to_string(node));
    }
    const std::uint64_t bit = std::uint64_t{1} << pos;
    if (x.mask & bit) {
      throw Error("duplicate subset member " + std::to_string(m));
    }
    x.mask |= bit;
  }
  if (x.mask == 0) throw Error("subset must be non-empty");
  return x;
}

Subset Subset::full(const Topology& topo, NodeId node) {
  const auto& kids = topo.children(node);
  if (kids.empty()) {
    throw Error("node " + std::to_string(node) + " has no children");
  }
  if (kids.size() > 64) throw Error("more than 64 children unsupported");
  const std::uint64_t mask = kids.size() == 64
                                 ? ~std::uint64_t{0}
                                 : (std::uint64_t{1} << kids.size()) - 1;
  return Subset{node, mask};
}

int Subset::size() const { return std::popcount(mask); }

std::vector<NodeId> Subset::members(const Topology& topo) const {
  const auto& kids = topo.children(node);
  std::vector<NodeId> out;
  for (std::size_t p = 0; p < kids.size(); ++p) {
    if ((mask >> p) & 1u) out.push_back(kids[p]);
  }
  return out;
}

std::string Subset::label(const Topology& topo) const {
  std::string out = "{";
  bool first = true;
  for (NodeId m : members(topo)) {
    if (!first) out += ',';
    out += std::to_string(m);
    first = false;
  }
  out += '}';
  return out;
}

std::vector<Subset> enumerate_subsets(const Topology& topo, NodeId k, int degree) {
  const auto& kids = topo.children(k);
  const int deg_total = static_cast<int>(kids.size());
  if (degree < 1 || degree > deg_total) {
    throw Error("subset degree " + std::to_string(degree) +
                " out of range for node " + std::to_string(k) + " with " +
                std::to_string(deg_total) + " children");
  }

  std::uint64_t count = 1;
  for (int i = 0; i < degree; ++i) {
    count = count * static_cast<std::uint64_t>(deg_total - i) /
            static_cast<std::uint64_t>(i + 1);
    if (count > kSubsetCap) {
      throw Error("subset enumeration for node " + std::to_string(k) +
                  " exceeds the cap of " + std::to_string(kSubsetCap));
    }
  }

  std::vector<Subset> out;
  out.reserve(count);
  std::vector<int> pos(degree);
  for (int i = 0; i < degree; ++i) pos[i] = i;
  while (true) {
    std::uint64_t mask = 0;
    for (int p : pos) mask |= std::uint64_t{1} << p;
    out.push_back(Subset{k, mask});

    int i = degree - 1;
    while (i >= 0 && pos[i] == deg_total - degree + i) --i;
    if (i < 0) break;
    ++pos[i];
    for (int j = i + 1; j < degree; ++j) pos[j] = pos[j - 1] + 1;
  }
  return out;
}

namespace {

struct MemoKey {
  NodeId node;
  std::uint64_t mask;
  bool union_kind;
  bool operator==(const MemoKey&) const = default;
};

struct MemoKeyHash {
  std::size_t operator()(const MemoKey& k) const {
    std::uint64_t h = k.mask * 0x9E3779B97F4A7C15ULL;
    h ^= (static_cast<std::uint64_t>(k.node) << 1) ^
         static_cast<std::uint64_t>(k.union_kind);
    h ^= h >> 29;
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

struct StatsTable::Memo {
  std::mutex lock;
  std::unordered_map<MemoKey, std::uint64_t, MemoKeyHash> counts;
};

StatsTable::StatsTable(StatsTable&&) noexcept = default;
StatsTable& StatsTable::operator=(StatsTable&&) noexcept = default;
StatsTable::~StatsTable() = default;

StatsTable::StatsTable(const ObservationMatrix& obs, const Topology& topo)
    : probe_count_(obs.probe_count()), topo_(topo), memo_(std::make_unique<Memo>()) {
  const std::size_t count = topo.node_count();
  if (obs.receiver_count() != topo.receivers().size()) {
    throw ObservationError("observation matrix has " +
                           std::to_string(obs.receiver_count()) +
                           " receivers, topology has " +
                           std::to_string(topo.receivers().size()));
  }

  hits_.assign(count, BitVec());
  hit_counts_.assign(count, 0);
  const auto& order = topo.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId k = *it;
    if (topo.is_leaf(k)) {
      hits_[k] = obs.column(obs.column_of(k));  // throws on missing receiver
    } else {
      BitVec acc(probe_count_);
      for (NodeId j : topo.children(k)) acc |= hits_[j];
      hits_[k] = std::move(acc);
    }
    hit_counts_[k] = hits_[k].count();
  }
}

void StatsTable::check_subset(const Subset& x) const {
  if (x.node >= topo_.node_count() || topo_.is_leaf(x.node)) {
    throw Error("node " + std::to_string(x.node) + " has no child subsets");
  }
  const std::size_t deg = topo_.children(x.node).size();
  const std::uint64_t full =
      deg >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << deg) - 1;
  if (x.mask == 0 || (x.mask & ~full) != 0) {
    throw Error("subset mask does not address children of node " +
                std::to_string(x.node));
  }
}

std::uint64_t StatsTable::simultaneous_count(const Subset& x) const {
  check_subset(x);
  const MemoKey key{x.node, x.mask, false};
  std::lock_guard<std::mutex> guard(memo_->lock);
  if (const auto it = memo_->counts.find(key); it != memo_->counts.end()) {
    return it->second;
  }
  std::vector<const BitVec*> vs;
  for (NodeId j : x.members(topo_)) vs.push_back(&hits_[j]);
  const std::uint64_t value = BitVec::and_count(vs);
  memo_->counts.emplace(key, value);
  return value;
}

std::uint64_t StatsTable::union_count(const Subset& x) const {
  check_subset(x);
  const MemoKey key{x.node, x.mask, true};
  std::lock_guard<std::mutex> guard(memo_->lock);
  if (const auto it = memo_->counts.find(key); it != memo_->counts.end()) {
    return it->second;
  }
  std::vector<const BitVec*> vs;
  for (NodeId j : x.members(topo_)) vs.push_back(&hits_[j]);
  const std::uint64_t value = BitVec::or_count(vs);
  memo_->counts.emplace(key, value);
  return value;
}

std::int64_t StatsTable::inclusion_exclusion_residual(NodeId k) const {
  if (k >= topo_.node_count() || topo_.is_leaf(k)) {
    throw Error("node " + std::to_string(k) + " is not internal");
  }
  const std::size_t deg = topo_.children(k).size();
  if (deg > 16) {
    throw Error("inclusion-exclusion over node " + std::to_string(k) +
                " exceeds the subset cap");
  }
  std::int64_t signed_sum = 0;
  const std::uint64_t full = (std::uint64_t{1} << deg) - 1;
  for (std::uint64_t mask = 1; mask <= full; ++mask) {
    const auto count =
        static_cast<std::int64_t>(simultaneous_count(Subset{k, mask}));
    signed_sum += (std::popcount(mask) % 2 == 1) ? count : -count;
  }
  return static_cast<std::int64_t>(union_count(Subset{k, full})) - signed_sum;
}

std::string StatsTable::dump_json(std::size_t subset_child_limit) const {
  nlohmann::json doc;
  doc["n"] = probe_count_;
  nlohmann::json rates = nlohmann::json::object();
  for (NodeId k = 0; k < topo_.node_count(); ++k) {
    rates[std::to_string(k)] = empirical_pass(k);
  }
  doc["gamma_hat"] = std::move(rates);

  nlohmann::json subsets = nlohmann::json::object();
  for (NodeId k = 0; k < topo_.node_count(); ++k) {
    if (topo_.is_leaf(k) || k == 0) continue;
    const std::size_t deg = topo_.children(k).size();
    if (deg > subset_child_limit) continue;
    nlohmann::json list = nlohmann::json::array();
    for (int size = 1; size <= static_cast<int>(deg); ++size) {
      for (const Subset& x : enumerate_subsets(topo_, k, size)) {
        list.push_back({{"members", x.members(topo_)},
                        {"simultaneous", simultaneous_count(x)},
                        {"union", union_count(x)}});
      }
    }
    subsets[std::to_string(k)] = std::move(list);
  }
  doc["subsets"] = std::move(subsets);
  return doc.dump(2) + "\n";
}

}  // namespace tomo

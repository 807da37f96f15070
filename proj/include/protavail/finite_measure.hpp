#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "protavail/error.hpp"

// Exact computations on a finite probability space (Omega, 2^Omega, P) with a
// filtration given by refining partitions. Subsets of Omega are bitmasks, so
// every operation that enumerates events is exhaustive and exact.
namespace protavail::finite {

using Subset = std::uint32_t;
using Partition = std::vector<Subset>;
using SubsetFamily = std::vector<Subset>;  // sorted ascending, no duplicates

inline constexpr std::size_t kMaxOutcomes = 16;

inline constexpr Subset bit(std::size_t i) noexcept { return Subset{1} << i; }

class FiniteSpace {
 public:
  FiniteSpace(std::vector<std::string> outcomes, std::vector<double> probs)
      : outcomes_(std::move(outcomes)), probs_(std::move(probs)) {
    if (outcomes_.empty() || outcomes_.size() > kMaxOutcomes)
      throw std::invalid_argument("finite space needs between 1 and 16 outcomes");
    if (probs_.size() != outcomes_.size())
      throw std::invalid_argument("probabilities must align with outcomes");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0)) throw std::invalid_argument("probabilities must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("probabilities must sum to 1");
    for (std::size_t i = 0; i < outcomes_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (outcomes_[i] == outcomes_[j])
          throw std::invalid_argument("duplicate outcome label '" + outcomes_[i] + "'");
  }

  static FiniteSpace uniform(std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("w" + std::to_string(i + 1));
    return FiniteSpace(std::move(labels), std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const noexcept { return outcomes_.size(); }
  Subset full() const noexcept { return static_cast<Subset>((std::uint64_t{1} << size()) - 1); }
  const std::vector<std::string>& outcomes() const noexcept { return outcomes_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  double prob(std::size_t i) const { return probs_.at(i); }

  std::size_t index_of(std::string_view label) const {
    for (std::size_t i = 0; i < outcomes_.size(); ++i)
      if (outcomes_[i] == label) return i;
    throw std::invalid_argument("unknown outcome '" + std::string(label) + "'");
  }

  double mass(Subset s) const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      if (s & bit(i)) m += probs_[i];
    return m;
  }

  Subset subset(std::initializer_list<std::string_view> labels) const {
    Subset s = 0;
    for (auto l : labels) s |= bit(index_of(l));
    return s;
  }

 private:
  std::vector<std::string> outcomes_;
  std::vector<double> probs_;
};

// A real random variable, stored aligned with the space's outcome order.
struct FiniteRV {
  std::vector<double> values;

  double operator[](std::size_t i) const { return values.at(i); }
  friend bool operator==(const FiniteRV&, const FiniteRV&) = default;
};

// A random time; +infinity means "never within the horizon".
struct ArrivalTime {
  std::vector<double> times;
};

inline bool is_partition(const Partition& blocks, Subset full) {
  Subset seen = 0;
  for (Subset b : blocks) {
    if (b == 0 || (b & ~full) || (seen & b)) return false;
    seen |= b;
  }
  return seen == full;
}

// A set is measurable with respect to a partition iff every block lies
// entirely inside or entirely outside it.
inline bool is_union_of_blocks(Subset s, const Partition& blocks) noexcept {
  for (Subset b : blocks)
    if ((s & b) != 0 && (s & b) != b) return false;
  return true;
}

class PartitionFiltration {
 public:
  // Null outcomes are split into singleton blocks, so every P-null set is
  // measurable at every grid time. Non-null blocks keep their conditional
  // averages and refinement is preserved.
  PartitionFiltration(const FiniteSpace& space, std::vector<double> grid,
                      std::vector<Partition> partitions)
      : grid_(std::move(grid)), partitions_(std::move(partitions)), full_(space.full()) {
    if (grid_.empty() || grid_.size() != partitions_.size())
      throw std::invalid_argument("one partition per grid time is required");
    for (std::size_t k = 1; k < grid_.size(); ++k)
      if (!(grid_[k] > grid_[k - 1]))
        throw std::invalid_argument("grid must be strictly increasing");
    Subset null = 0;
    for (std::size_t i = 0; i < space.size(); ++i)
      if (space.prob(i) == 0.0) null |= bit(i);
    for (auto& blocks : partitions_) {
      if (!is_partition(blocks, full_))
        throw std::invalid_argument("partition blocks must be disjoint and cover the space");
      if (null) blocks = split_null(blocks, null);
      std::sort(blocks.begin(), blocks.end());
    }
  }

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<Partition>& partitions() const noexcept { return partitions_; }
  const Partition& at(std::size_t k) const { return partitions_.at(k); }
  std::size_t length() const noexcept { return grid_.size(); }
  Subset full() const noexcept { return full_; }

 private:
  static Partition split_null(const Partition& blocks, Subset null) {
    Partition out;
    for (Subset b : blocks) {
      if (Subset rest = b & ~null) out.push_back(rest);
      for (Subset z = b & null; z; z &= z - 1) out.push_back(z & (~z + 1));
    }
    return out;
  }

  std::vector<double> grid_;
  std::vector<Partition> partitions_;
  Subset full_;
};

// Label-based partition construction, e.g. {{"a","b"},{"c","d"}}.
inline Partition make_partition(const FiniteSpace& space,
                                const std::vector<std::vector<std::string>>& blocks) {
  Partition out;
  for (const auto& block : blocks) {
    Subset s = 0;
    for (const auto& label : block) s |= bit(space.index_of(label));
    out.push_back(s);
  }
  return out;
}

inline Partition singleton_partition(const FiniteSpace& space) {
  Partition out;
  for (std::size_t i = 0; i < space.size(); ++i) out.push_back(bit(i));
  return out;
}

inline Partition trivial_partition(const FiniteSpace& space) { return {space.full()}; }

inline bool refines(const Partition& finer, const Partition& coarser) noexcept {
  for (Subset b : finer) {
    bool inside = false;
    for (Subset c : coarser) inside = inside || (b & ~c) == 0;
    if (!inside) return false;
  }
  return true;
}

inline bool check_refinement(const PartitionFiltration& f) {
  for (std::size_t k = 1; k < f.length(); ++k)
    if (!refines(f.at(k), f.at(k - 1))) return false;
  return true;
}

inline double expectation(const FiniteRV& x, const FiniteSpace& space) {
  double e = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) e += space.prob(i) * x.values.at(i);
  return e;
}

// E[x | sigma(blocks)]: blockwise probability-weighted average, 0 on null blocks.
inline FiniteRV cond_expect(const FiniteRV& x, const Partition& blocks,
                            const FiniteSpace& space) {
  if (x.values.size() != space.size())
    throw std::invalid_argument("random variable must be total on the space");
  FiniteRV out{std::vector<double>(space.size(), 0.0)};
  for (Subset b : blocks) {
    double mass = 0.0, weighted = 0.0;
    std::optional<double> constant;
    bool is_constant = true;
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (!(b & bit(i)) || space.prob(i) == 0.0) continue;
      mass += space.prob(i);
      weighted += space.prob(i) * x.values[i];
      if (!constant) constant = x.values[i];
      is_constant = is_constant && x.values[i] == *constant;
    }
    // A block on which x is already constant keeps that value bit for bit,
    // so conditioning twice changes nothing.
    double value = 0.0;
    if (mass > 0.0) value = is_constant ? *constant : weighted / mass;
    for (std::size_t i = 0; i < space.size(); ++i)
      if (b & bit(i)) out.values[i] = value;
  }
  return out;
}

struct TowerResult {
  double lhs;  // E[x]
  double rhs;  // E[E[x | blocks]]
};

inline TowerResult tower_check(const FiniteRV& x, const Partition& blocks,
                               const FiniteSpace& space) {
  return {expectation(x, space), expectation(cond_expect(x, blocks, space), space)};
}

inline bool is_measurable(const FiniteRV& x, const Partition& blocks) {
  for (Subset b : blocks) {
    const int first = std::countr_zero(b);
    for (Subset z = b; z; z &= z - 1)
      if (x.values.at(std::countr_zero(z)) != x.values.at(first)) return false;
  }
  return true;
}

inline bool is_adapted(std::span<const FiniteRV> process, const PartitionFiltration& f) {
  if (process.size() != f.length())
    throw std::invalid_argument("process length must match the grid");
  for (std::size_t k = 0; k < f.length(); ++k)
    if (!is_measurable(process[k], f.at(k))) return false;
  return true;
}

// {omega : T(omega) <= t}
inline Subset arrived_by(const ArrivalTime& T, double t) {
  Subset s = 0;
  for (std::size_t i = 0; i < T.times.size(); ++i)
    if (T.times[i] <= t) s |= bit(i);
  return s;
}

inline bool is_stopping_time(const ArrivalTime& T, const PartitionFiltration& f) {
  for (std::size_t k = 0; k < f.length(); ++k)
    if (!is_union_of_blocks(arrived_by(T, f.grid()[k]), f.at(k))) return false;
  return true;
}

namespace detail {

// A family of subsets of a finite set is an algebra iff its atoms partition
// the set and the family holds exactly the 2^atoms unions of them.
inline bool is_algebra(const SubsetFamily& family, Subset full) {
  if (family.empty()) return false;
  Partition atoms;
  Subset covered = 0;
  for (std::size_t i = 0; full >> i; ++i) {
    if (!(full & bit(i)) || (covered & bit(i))) continue;
    Subset atom = full;
    for (Subset a : family) atom &= (a & bit(i)) ? a : ~a;
    if (covered & atom) return false;
    covered |= atom;
    atoms.push_back(atom);
  }
  if (covered != full || atoms.size() >= 32) return false;
  return family.size() == (std::size_t{1} << atoms.size());
}

}  // namespace detail

// F_T = {A : A cap {T <= t_k} in F_{t_k} for every grid time}.
inline SubsetFamily stopped_sigma(const ArrivalTime& T, const PartitionFiltration& f) {
  if (!is_stopping_time(T, f)) throw NotAStoppingTime();
  std::vector<Subset> arrived;
  for (double t : f.grid()) arrived.push_back(arrived_by(T, t));
  SubsetFamily out;
  const std::uint64_t count = std::uint64_t{f.full()} + 1;
  for (std::uint64_t a = 0; a < count; ++a) {
    const Subset A = static_cast<Subset>(a);
    bool member = true;
    for (std::size_t k = 0; k < f.length() && member; ++k)
      member = is_union_of_blocks(A & arrived[k], f.at(k));
    if (member) out.push_back(A);
  }
  if (!detail::is_algebra(out, f.full()))
    throw std::logic_error("stopped sigma-algebra failed closure verification");
  return out;
}

// The events not yet decidable at grid index k: every subset that is not a
// union of blocks of partitions[k].
inline SubsetFamily undiscovered_info(const PartitionFiltration& f, std::size_t k) {
  const Partition& blocks = f.at(k);
  SubsetFamily out;
  const std::uint64_t count = std::uint64_t{f.full()} + 1;
  for (std::uint64_t a = 0; a < count; ++a)
    if (!is_union_of_blocks(static_cast<Subset>(a), blocks)) out.push_back(static_cast<Subset>(a));
  return out;
}

// Algebra generated by a partition: all unions of its blocks.
inline SubsetFamily generated_algebra(const Partition& blocks, Subset full) {
  SubsetFamily out;
  const std::uint64_t count = std::uint64_t{full} + 1;
  for (std::uint64_t a = 0; a < count; ++a)
    if (is_union_of_blocks(static_cast<Subset>(a), blocks)) out.push_back(static_cast<Subset>(a));
  return out;
}

// Fixture format:
//   {"outcomes":[...], "probs":[...], "grid":[...],
//    "partitions":[[["a","b"],["c","d"]], ...]}
struct Fixture {
  FiniteSpace space;
  PartitionFiltration filtration;
};

inline Fixture parse_fixture(std::string_view text) {
  const auto doc = nlohmann::json::parse(text.begin(), text.end());
  FiniteSpace space(doc.at("outcomes").get<std::vector<std::string>>(),
                    doc.at("probs").get<std::vector<double>>());
  std::vector<Partition> partitions;
  for (const auto& p : doc.at("partitions"))
    partitions.push_back(make_partition(space, p.get<std::vector<std::vector<std::string>>>()));
  PartitionFiltration f(space, doc.at("grid").get<std::vector<double>>(), std::move(partitions));
  return {std::move(space), std::move(f)};
}

inline std::string serialize_fixture(const FiniteSpace& space, const PartitionFiltration& f) {
  nlohmann::ordered_json doc;
  doc["outcomes"] = space.outcomes();
  doc["probs"] = space.probs();
  doc["grid"] = f.grid();
  doc["partitions"] = nlohmann::ordered_json::array();
  for (const auto& blocks : f.partitions()) {
    auto jb = nlohmann::ordered_json::array();
    for (Subset b : blocks) {
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < space.size(); ++i)
        if (b & bit(i)) labels.push_back(space.outcomes()[i]);
      jb.push_back(labels);
    }
    doc["partitions"].push_back(std::move(jb));
  }
  return doc.dump();
}

}  // namespace protavail::finite

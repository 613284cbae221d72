#pragma once

// Brute-force enumeration of every goal-achieving stripped plan up to a
// depth, by breadth-first expansion over an exact finite abstraction of the
// optimistic state space. Written independently of the search code: states
// are tracked per stripped prefix as a set, because one stripped sequence
// covers many ground realizations (every move collapses to one symbol), and
// a prefix is a valid plan when any realization of it ends in a goal state.

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pigi/model.h"

namespace toys {

namespace oracle_detail {

// Angle term of a door: the zero constant (closed / pulled shut), the bound
// nonzero init value, or the one canonical optimistic angle.
enum DoorAngle : int8_t { kZeroAngle = 0, kInitAngle = 1, kParamAngle = 2 };

// Pose context of an item: still at (or returned to) its bound init pose,
// currently held, or at the canonical placement of some region.
enum : int8_t { kCtxInit = -1, kCtxHeld = -2 };

struct OState {
  int8_t held = -1;               // item slot or -1
  std::vector<int8_t> item_ctx;   // kCtxInit / kCtxHeld / region slot
  std::vector<int8_t> door_angle; // DoorAngle per door slot
  std::vector<int8_t> door_open;  // Open literal flag per door slot
  int16_t conf = 0;               // conf slot; 0 = bound start conf

  bool operator<(const OState& o) const {
    if (held != o.held) return held < o.held;
    if (item_ctx != o.item_ctx) return item_ctx < o.item_ctx;
    if (door_angle != o.door_angle) return door_angle < o.door_angle;
    if (door_open != o.door_open) return door_open < o.door_open;
    return conf < o.conf;
  }
};

}  // namespace oracle_detail

class PlanOracle {
 public:
  explicit PlanOracle(const pigi::Problem& p) : p_(p) {
    using namespace pigi;
    for (ObjId o = 0; o < static_cast<ObjId>(p.objects.size()); ++o) {
      switch (p.objects[o].category) {
        case ObjectCategory::Item: items_.push_back(o); break;
        case ObjectCategory::Surface: regions_.push_back(o); break;
        case ObjectCategory::Space: spaces_.push_back(o); break;
        case ObjectCategory::Door: doors_.push_back(o); break;
        default: break;
      }
    }
    n_surfaces_ = static_cast<int>(regions_.size());
    for (ObjId s : spaces_) regions_.push_back(s);

    // Conf slots: 0 is the bound start conf; then one pick conf per item,
    // one conf per (item, region) placement, two pull confs per door.
    conf_pick_.assign(items_.size(), -1);
    conf_place_.assign(items_.size(),
                       std::vector<int>(regions_.size(), -1));
    conf_pull_.assign(doors_.size(), {-1, -1});
    int next = 1;
    for (size_t i = 0; i < items_.size(); ++i) conf_pick_[i] = next++;
    for (size_t i = 0; i < items_.size(); ++i)
      for (size_t r = 0; r < regions_.size(); ++r)
        if (placeable(i, r)) conf_place_[i][r] = next++;
    for (size_t d = 0; d < doors_.size(); ++d) {
      conf_pull_[d][0] = next++;  // opening
      conf_pull_[d][1] = next++;  // closing
    }
    n_conf_ = next;

    init_region_.assign(items_.size(), -1);
    for (size_t i = 0; i < items_.size(); ++i) {
      for (const Literal& l : p.init.lits) {
        if ((l.pred == Pred::Supported || l.pred == Pred::In) &&
            std::get<ObjId>(l.args[0]) == items_[i])
          init_region_[i] = region_slot(std::get<ObjId>(l.args[1]));
      }
    }
    init_.item_ctx.assign(items_.size(), oracle_detail::kCtxInit);
    init_.door_angle.assign(doors_.size(), oracle_detail::kZeroAngle);
    init_.door_open.assign(doors_.size(), 0);
    for (size_t d = 0; d < doors_.size(); ++d) {
      const Literal* a = p.init.find_prefix(Pred::AtAngle, {doors_[d]});
      double ang = std::get<Value>(a->args[1]).data[0];
      init_.door_angle[d] =
          ang == 0.0 ? oracle_detail::kZeroAngle : oracle_detail::kInitAngle;
      init_.door_open[d] = ang == 0.0 ? 0 : 1;
    }
  }

  // All valid plans of length <= depth, including the empty plan when the
  // start state already satisfies the goal. Lexicographic order.
  std::vector<pigi::StrippedPlan> enumerate(int depth) const {
    using namespace pigi;
    using oracle_detail::OState;
    std::map<StrippedPlan, std::set<OState>> frontier;
    frontier[{}].insert(init_);
    std::vector<StrippedPlan> valid;
    if (satisfied(init_)) valid.push_back({});
    for (int step = 0; step < depth; ++step) {
      std::map<StrippedPlan, std::set<OState>> next;
      for (const auto& [prefix, states] : frontier)
        for (const OState& s : states)
          for (auto& [act, s2] : successors(s)) {
            StrippedPlan ext = prefix;
            ext.push_back(act);
            next[std::move(ext)].insert(s2);
          }
      for (const auto& [prefix, states] : next)
        for (const OState& s : states)
          if (satisfied(s)) {
            valid.push_back(prefix);
            break;
          }
      frontier = std::move(next);
    }
    return valid;
  }

 private:
  bool placeable(size_t item, size_t region) const {
    using namespace pigi;
    if (static_cast<int>(region) < n_surfaces_) return true;
    Literal c{Pred::Containable, {items_[item], regions_[region]}};
    return p_.init.contains(c);
  }

  int region_slot(pigi::ObjId r) const {
    for (size_t k = 0; k < regions_.size(); ++k)
      if (regions_[k] == r) return static_cast<int>(k);
    return -1;
  }
  int item_slot(pigi::ObjId o) const {
    for (size_t k = 0; k < items_.size(); ++k)
      if (items_[k] == o) return static_cast<int>(k);
    return -1;
  }
  int door_slot(pigi::ObjId o) const {
    for (size_t k = 0; k < doors_.size(); ++k)
      if (doors_[k] == o) return static_cast<int>(k);
    return -1;
  }

  std::vector<std::pair<pigi::StrippedAction, oracle_detail::OState>>
  successors(const oracle_detail::OState& s) const {
    using namespace pigi;
    using namespace oracle_detail;
    std::vector<std::pair<StrippedAction, OState>> out;
    // move: to every optimistic conf other than the current one; the bound
    // start conf is never a target.
    for (int c = 1; c < n_conf_; ++c) {
      if (c == s.conf) continue;
      OState t = s;
      t.conf = static_cast<int16_t>(c);
      out.push_back({{"move", {}}, t});
    }
    for (size_t i = 0; i < items_.size(); ++i) {
      // pick: hand empty, item resting where the conf expects it.
      if (s.held < 0 && s.item_ctx[i] != kCtxHeld) {
        bool at_init_conf =
            s.conf == conf_pick_[i] && s.item_ctx[i] == kCtxInit;
        bool at_place_conf = s.item_ctx[i] >= 0 &&
                             s.conf == conf_place_[i][s.item_ctx[i]];
        if (at_init_conf || at_place_conf) {
          OState t = s;
          t.held = static_cast<int8_t>(i);
          t.item_ctx[i] = kCtxHeld;
          out.push_back({{"pick", {items_[i]}}, t});
        }
      }
      // place: holding the item, at one of its confs; the pick conf puts
      // it back at the bound init pose.
      if (s.held == static_cast<int>(i)) {
        if (s.conf == conf_pick_[i]) {
          OState t = s;
          t.held = -1;
          t.item_ctx[i] = kCtxInit;
          out.push_back({{"place", {items_[i]}}, t});
        }
        for (size_t r = 0; r < regions_.size(); ++r)
          if (conf_place_[i][r] == s.conf) {
            OState t = s;
            t.held = -1;
            t.item_ctx[i] = static_cast<int8_t>(r);
            out.push_back({{"place", {items_[i]}}, t});
          }
      }
    }
    for (size_t d = 0; d < doors_.size(); ++d) {
      if (s.held >= 0) continue;
      if (s.conf == conf_pull_[d][0] && s.door_angle[d] != kParamAngle) {
        OState t = s;
        t.door_angle[d] = kParamAngle;
        t.door_open[d] = 1;
        out.push_back({{"pullopen", {doors_[d]}}, t});
      }
      if (s.conf == conf_pull_[d][1] && s.door_angle[d] != kZeroAngle) {
        OState t = s;
        t.door_angle[d] = kZeroAngle;
        t.door_open[d] = 0;
        out.push_back({{"pullclose", {doors_[d]}}, t});
      }
    }
    return out;
  }

  bool satisfied(const oracle_detail::OState& s) const {
    using namespace pigi;
    using namespace oracle_detail;
    for (const Literal& g : p_.goal) {
      ObjId a0 = std::get<ObjId>(g.args[0]);
      switch (g.pred) {
        case Pred::Holding: {
          int i = item_slot(a0);
          if (s.held != i) return false;
          break;
        }
        case Pred::On:
        case Pred::Supported:
        case Pred::In: {
          int i = item_slot(a0);
          int r = region_slot(std::get<ObjId>(g.args[1]));
          bool here = s.item_ctx[i] == r ||
                      (s.item_ctx[i] == kCtxInit && init_region_[i] == r);
          if (!here) return false;
          break;
        }
        case Pred::Open:
          if (!s.door_open[door_slot(a0)]) return false;
          break;
        case Pred::Closed:
          if (s.door_open[door_slot(a0)]) return false;
          break;
        default:
          throw std::logic_error("oracle: unsupported goal predicate");
      }
    }
    return true;
  }

  const pigi::Problem& p_;
  std::vector<pigi::ObjId> items_, regions_, spaces_, doors_;
  int n_surfaces_ = 0;
  std::vector<int> conf_pick_;
  std::vector<std::vector<int>> conf_place_;
  std::vector<std::array<int, 2>> conf_pull_;
  int n_conf_ = 1;
  std::vector<int> init_region_;
  oracle_detail::OState init_;
};

}  // namespace toys

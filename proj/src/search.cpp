#include "pigi/search.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <climits>
#include <cstring>
#include <unordered_map>

namespace pigi {

int OptimisticParameterSet::add(OptimisticParam p, const std::string& ctx) {
  p.id = static_cast<int>(params.size());
  p.level = level;
  auto [it, fresh] = canon.try_emplace(ctx, p.id);
  (void)it;
  p.canonical = fresh;
  params.push_back(std::move(p));
  return params.back().id;
}

int OptimisticParameterSet::output_param(const std::string& signature) {
  auto it = outputs.find(signature);
  if (it != outputs.end()) return it->second;
  OptimisticParam p;
  p.id = static_cast<int>(params.size());
  p.kind = ValueKind::Trajectory;
  p.level = level;
  p.family = "traj";
  p.canonical = true;
  params.push_back(std::move(p));
  outputs.emplace(signature, params.back().id);
  return params.back().id;
}

const OptimisticParam* OptimisticParameterSet::find(int id) const {
  if (id < 0 || id >= static_cast<int>(params.size())) return nullptr;
  return &params[id];
}

namespace {

std::string key_of(ObjId a, ObjId b = -1) {
  std::string s = std::to_string(a);
  if (b >= 0) s += ":" + std::to_string(b);
  return s;
}

}  // namespace

void new_parameters(OptimisticParameterSet& X, const Problem& p) {
  X.level += 1;
  std::vector<ObjId> items, surfaces, spaces, doors;
  for (ObjId o = 0; o < static_cast<ObjId>(p.objects.size()); ++o) {
    switch (p.objects[o].category) {
      case ObjectCategory::Item:
        if (p.init.contains({Pred::Graspable, {Term(o)}}))
          items.push_back(o);
        break;
      case ObjectCategory::Surface:
        surfaces.push_back(o);
        break;
      case ObjectCategory::Space:
        spaces.push_back(o);
        break;
      case ObjectCategory::Door:
        doors.push_back(o);
        break;
      default:
        break;
    }
  }

  std::map<ObjId, int> grasp_of, hgrasp_of;
  for (ObjId i : items) {
    OptimisticParam g;
    g.kind = ValueKind::Grasp;
    g.family = "grasp";
    g.obj = i;
    grasp_of[i] = X.add(std::move(g), "grasp:" + key_of(i));
  }
  for (ObjId i : items) {
    auto add_place = [&](ObjId r) {
      OptimisticParam pp;
      pp.kind = ValueKind::Pose;
      pp.family = "place";
      pp.obj = i;
      pp.region = r;
      X.add(std::move(pp), "place:" + key_of(i, r));
    };
    for (ObjId s : surfaces) add_place(s);
    for (ObjId sp : spaces)
      if (p.init.contains({Pred::Containable, {Term(i), Term(sp)}}))
        add_place(sp);
  }
  for (ObjId d : doors) {
    OptimisticParam a;
    a.kind = ValueKind::JointAngle;
    a.family = "angle";
    a.obj = d;
    X.add(std::move(a), "angle:" + key_of(d));
    OptimisticParam hg;
    hg.kind = ValueKind::Grasp;
    hg.family = "hgrasp";
    hg.obj = d;
    hgrasp_of[d] = X.add(std::move(hg), "hgrasp:" + key_of(d));
  }
  for (ObjId i : items) {
    OptimisticParam c;
    c.kind = ValueKind::BaseConf;
    c.family = "conf";
    c.obj = i;
    c.pose_param = kInitPoseCtx;
    c.grasp_param = grasp_of[i];
    X.add(std::move(c), "conf:pick:" + key_of(i));
  }
  for (ObjId d : doors) {
    for (int dir : {+1, -1}) {
      OptimisticParam c;
      c.kind = ValueKind::BaseConf;
      c.family = "conf";
      c.obj = d;
      c.dir = dir;
      c.grasp_param = hgrasp_of[d];
      X.add(std::move(c),
            std::string("conf:") + (dir > 0 ? "open:" : "close:") + key_of(d));
    }
  }
  // Confs reaching the canonical placement poses exist from level two on;
  // they are what lets plans pick an item back up after a put-down.
  if (X.level >= 2) {
    for (ObjId i : items) {
      auto add_place_conf = [&](ObjId r) {
        auto pit = X.canon.find("place:" + key_of(i, r));
        auto git = X.canon.find("grasp:" + key_of(i));
        if (pit == X.canon.end() || git == X.canon.end()) return;
        OptimisticParam c;
        c.kind = ValueKind::BaseConf;
        c.family = "conf";
        c.obj = i;
        c.region = r;
        c.pose_param = pit->second;
        c.grasp_param = git->second;
        X.add(std::move(c), "conf:place:" + key_of(i, r));
      };
      for (ObjId s : surfaces) add_place_conf(s);
      for (ObjId sp : spaces)
        if (p.init.contains({Pred::Containable, {Term(i), Term(sp)}}))
          add_place_conf(sp);
    }
  }
}

bool ForbiddenSet::insert(const StrippedPlan& plan) {
  int at = 0;
  for (const StrippedAction& a : plan) {
    auto it = nodes_[at].next.find(a);
    if (it == nodes_[at].next.end()) {
      nodes_.push_back({});
      it = nodes_[at].next.emplace(a, static_cast<int>(nodes_.size()) - 1)
               .first;
    }
    at = it->second;
  }
  if (nodes_[at].term) return false;
  nodes_[at].term = true;
  ++count_;
  return true;
}

bool ForbiddenSet::contains(const StrippedPlan& plan) const {
  int at = 0;
  for (const StrippedAction& a : plan) {
    at = step(at, a);
    if (at < 0) return false;
  }
  return nodes_[at].term;
}

int ForbiddenSet::step(int node, const StrippedAction& a) const {
  auto it = nodes_[node].next.find(a);
  return it == nodes_[node].next.end() ? -1 : it->second;
}

namespace {

void append_term_key(std::string& out, const Term& t) {
  if (std::holds_alternative<ObjId>(t)) {
    out += 'o';
    out += std::to_string(std::get<ObjId>(t));
  } else if (std::holds_alternative<FreeRef>(t)) {
    out += 'f';
    out += std::to_string(std::get<FreeRef>(t).id);
  } else {
    const Value& v = std::get<Value>(t);
    out += 'v';
    out += std::to_string(static_cast<int>(v.kind));
    for (double d : v.data) {
      uint64_t bits = std::bit_cast<uint64_t>(d);
      char buf[17];
      auto [p, ec] = std::to_chars(buf, buf + 16, bits, 16);
      (void)ec;
      out.append(buf, p);
      out += ',';
    }
  }
  out += ';';
}

std::string state_key(const State& s) {
  std::string out;
  out.reserve(s.lits.size() * 16);
  for (const Literal& l : s.lits) {
    out += std::to_string(static_cast<int>(l.pred));
    out += ':';
    for (const Term& t : l.args) append_term_key(out, t);
    out += '|';
  }
  return out;
}

StrippedAction strip_one(const GroundAction& ga) {
  Skeleton sk;
  sk.steps.push_back(ga);
  return strip_continuous(sk)[0];
}

struct LimitHit {};

}  // namespace

class StateGraph {
 public:
  struct Edge {
    GroundAction act;
    StrippedAction sa;
    int succ = -1;
    std::string key;
  };

  int version = -1;
  std::string problem_name;

  void reset(const Problem& p, const OptimisticParameterSet& X) {
    states_.clear();
    hvals_.clear();
    edges_.clear();
    index_.clear();
    robot_ = p.robot();
    items_.clear();
    doors_.clear();
    init_pose_.assign(p.objects.size(), Value{});
    init_region_.assign(p.objects.size(), -1);
    conf_params_.clear();
    angle_param_.clear();
    for (ObjId o = 0; o < static_cast<ObjId>(p.objects.size()); ++o) {
      if (p.objects[o].category == ObjectCategory::Item) {
        items_.push_back(o);
        const Literal* l = p.init.find_prefix(Pred::Supported, {Term(o)});
        if (!l) l = p.init.find_prefix(Pred::In, {Term(o)});
        if (l && l->args.size() >= 3) {
          init_region_[o] = std::get<ObjId>(l->args[1]);
          init_pose_[o] = std::get<Value>(l->args[2]);
        }
      } else if (p.objects[o].category == ObjectCategory::Door) {
        doors_.push_back(o);
      }
    }
    for (const OptimisticParam& pp : X.params)
      if (pp.canonical && pp.family == "conf") conf_params_.push_back(pp.id);
    for (ObjId d : doors_) {
      auto it = X.canon.find("angle:" + key_of(d));
      if (it != X.canon.end()) angle_param_[d] = it->second;
    }
    goal_ = p.goal;
    std::sort(goal_.begin(), goal_.end(), literal_less);
    goal_.erase(std::unique(goal_.begin(), goal_.end()), goal_.end());
  }

  int intern(State s) {
    std::string k = state_key(s);
    auto it = index_.find(k);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(states_.size());
    index_.emplace(std::move(k), id);
    int h = 0;
    for (const Literal& gl : goal_)
      if (!goal_satisfied(s, {gl})) ++h;
    states_.push_back(std::move(s));
    hvals_.push_back(h);
    edges_.emplace_back();
    return id;
  }

  int h(int node) const { return hvals_[node]; }
  size_t edge_count(int node) const { return edges_[node] ? edges_[node]->size() : 0; }
  const Edge& edge(int node, size_t i) const { return (*edges_[node])[i]; }
  bool expanded(int node) const { return edges_[node].has_value(); }

  void expand(int node, const Problem& p, OptimisticParameterSet& X) {
    if (edges_[node]) return;
    const State s = states_[node];  // copy: interning may reallocate
    std::vector<GroundAction> acts;

    const Literal* confl = s.find_prefix(Pred::AtConf, {Term(robot_)});
    if (!confl) {  // unreachable for well-formed states
      edges_[node].emplace();
      return;
    }
    Term q = confl->args[1];
    // Copy: with_output grows X and invalidates pointers into it.
    std::optional<OptimisticParam> qcopy;
    if (std::holds_alternative<FreeRef>(q))
      if (const OptimisticParam* f = X.find(std::get<FreeRef>(q).id)) qcopy = *f;
    const OptimisticParam* qp = qcopy ? &*qcopy : nullptr;
    bool hand = s.contains({Pred::HandEmpty, {}});

    auto with_output = [&](int schema, std::vector<Term> args) {
      std::string sig = builtin_schemas()[schema].variant + "|";
      for (const Term& t : args) append_term_key(sig, t);
      args.emplace_back(FreeRef{X.output_param(sig)});
      acts.push_back({schema, std::move(args)});
    };

    for (int c : conf_params_) {
      Term target = FreeRef{c};
      if (!term_equal(target, q))
        with_output(schema_index("move"), {Term(robot_), q, target});
    }

    for (ObjId i : items_) {
      const Literal* pl = s.find_prefix(Pred::Supported, {Term(i)});
      bool on_surface = pl != nullptr;
      if (!pl) pl = s.find_prefix(Pred::In, {Term(i)});
      if (pl && hand && qp && qp->family == "conf" && qp->dir == 0 &&
          qp->obj == i && s.contains({Pred::Graspable, {Term(i)}})) {
        const Term& pose = pl->args[2];
        bool ctx_ok =
            qp->pose_param == kInitPoseCtx
                ? term_equal(pose, Term(init_pose_[i]))
                : (std::holds_alternative<FreeRef>(pose) &&
                   std::get<FreeRef>(pose).id == qp->pose_param);
        if (ctx_ok) {
          int schema = schema_index(on_surface ? "pick@surface" : "pick@space");
          acts.push_back(
              {schema,
               {Term(i), pl->args[1], Term(robot_), pose,
                Term(FreeRef{qp->grasp_param}), q}});
        }
      }
      const Literal* hl = s.find_prefix(Pred::Holding, {Term(i)});
      if (hl && hl->args.size() >= 2 && qp && qp->family == "conf" &&
          qp->dir == 0 && qp->obj == i &&
          std::holds_alternative<FreeRef>(hl->args[1]) &&
          std::get<FreeRef>(hl->args[1]).id == qp->grasp_param) {
        ObjId dst = -1;
        Term pose = Term(FreeRef{-1});
        if (qp->pose_param >= 0) {
          dst = qp->region;
          pose = Term(FreeRef{qp->pose_param});
        } else if (qp->pose_param == kInitPoseCtx && init_region_[i] >= 0) {
          dst = init_region_[i];
          pose = Term(init_pose_[i]);
        }
        if (dst >= 0) {
          bool to_surface =
              p.objects[dst].category == ObjectCategory::Surface;
          if (to_surface ||
              s.contains({Pred::Containable, {Term(i), Term(dst)}})) {
            int schema =
                schema_index(to_surface ? "place@surface" : "place@space");
            acts.push_back({schema,
                            {Term(i), Term(dst), Term(robot_), pose,
                             hl->args[1], q}});
          }
        }
      }
    }

    for (ObjId d : doors_) {
      if (!hand || !qp || qp->family != "conf" || qp->obj != d) continue;
      const Literal* al = s.find_prefix(Pred::AtAngle, {Term(d)});
      if (!al) continue;
      if (qp->dir > 0) {
        auto it = angle_param_.find(d);
        if (it == angle_param_.end()) continue;
        Term target = FreeRef{it->second};
        if (!term_equal(target, al->args[1]))
          with_output(schema_index("pullopen"),
                      {Term(d), Term(robot_), al->args[1], target,
                       Term(FreeRef{qp->grasp_param}), q});
      } else if (qp->dir < 0) {
        if (!term_equal(al->args[1], Term(Value::joint_angle(0.0))))
          with_output(schema_index("pullclose"),
                      {Term(d), Term(robot_), al->args[1],
                       Term(FreeRef{qp->grasp_param}), q});
      }
    }

    std::vector<Edge> out;
    out.reserve(acts.size());
    for (GroundAction& ga : acts) {
      Edge e;
      e.sa = strip_one(ga);
      e.key = e.sa.name;
      for (ObjId o : e.sa.objects) {
        e.key += '\1';
        e.key += p.objects[o].id;
      }
      e.key += '\2';
      for (const Term& t : ga.args) append_term_key(e.key, t);
      State succ = apply_abstract(s, ga, p.objects);
      e.succ = intern(std::move(succ));
      e.act = std::move(ga);
      out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(),
              [](const Edge& a, const Edge& b) { return a.key < b.key; });
    edges_[node] = std::move(out);
  }

 private:
  std::vector<State> states_;
  std::vector<int> hvals_;
  std::vector<std::optional<std::vector<Edge>>> edges_;
  std::unordered_map<std::string, int> index_;
  std::vector<Literal> goal_;

  ObjId robot_ = -1;
  std::vector<ObjId> items_, doors_;
  std::vector<Value> init_pose_;
  std::vector<ObjId> init_region_;
  std::vector<int> conf_params_;
  std::map<ObjId, int> angle_param_;
};

namespace {

constexpr int kFound = -1;

struct Dfs {
  const Problem& p;
  OptimisticParameterSet& X;
  const ForbiddenSet& forbidden;
  const SearchOptions& opt;
  StateGraph& g;
  SearchStats& st;
  std::unordered_map<int64_t, int> tt;
  std::vector<std::pair<int, size_t>> path;  // (node, edge index)
  int64_t stride;

  // Returns kFound with `path` filled, or the smallest f over the bound.
  int run(int node, int trie, int depth, int bound) {
    int f = depth + g.h(node);
    if (f > bound) return f;
    if (g.h(node) == 0) {
      bool is_forbidden = trie >= 0 && forbidden.terminal(trie);
      // A forbidden goal stays expandable; only returning it is barred.
      if (!is_forbidden) return kFound;
    }
    int64_t key = static_cast<int64_t>(node) * stride + (trie + 1);
    auto it = tt.find(key);
    if (it != tt.end() && it->second <= depth) return INT_MAX;
    tt[key] = depth;
    if (++st.nodes_expanded > opt.node_limit) throw LimitHit{};
    st.max_depth = std::max(st.max_depth, depth);
    g.expand(node, p, X);
    int best = INT_MAX;
    for (size_t i = 0; i < g.edge_count(node); ++i) {
      int succ = g.edge(node, i).succ;
      int t2 = trie >= 0 ? forbidden.step(trie, g.edge(node, i).sa) : -1;
      path.emplace_back(node, i);
      int r = run(succ, t2, depth + 1, bound);
      if (r == kFound) return kFound;
      path.pop_back();
      best = std::min(best, r);
    }
    return best;
  }
};

}  // namespace

std::optional<Skeleton> forbid_search(const Problem& p,
                                      OptimisticParameterSet& X,
                                      const ForbiddenSet& forbidden,
                                      const SearchOptions& opt,
                                      SearchStats* stats, StateGraph* cache) {
  StateGraph local;
  StateGraph* g = cache ? cache : &local;
  if (g->version != X.canonical_count() || g->problem_name != p.name) {
    g->reset(p, X);
    g->version = X.canonical_count();
    g->problem_name = p.name;
  }
  int root = g->intern(p.init);

  SearchStats st;
  Dfs dfs{p, X, forbidden, opt, *g, st, {}, {},
          static_cast<int64_t>(forbidden.node_count()) + 2};
  std::optional<Skeleton> result;
  try {
    int bound = g->h(root);
    while (bound <= opt.depth_bound) {
      dfs.tt.clear();
      dfs.path.clear();
      int r = dfs.run(root, forbidden.root(), 0, bound);
      if (r == kFound) {
        Skeleton sk;
        for (auto [node, i] : dfs.path) sk.steps.push_back(g->edge(node, i).act);
        result = std::move(sk);
        break;
      }
      if (r == INT_MAX) break;  // space exhausted below the bound
      bound = r;
    }
  } catch (const LimitHit&) {
    st.hit_node_limit = true;
  }
  if (stats) *stats = st;
  return result;
}

std::vector<Skeleton> batch_skeletons(BatchSession& se, const Problem& p,
                                      int k) {
  if (!se.graph) se.graph = std::make_shared<StateGraph>();
  std::vector<Skeleton> out;
  for (int j = 0; j < k; ++j) {
    auto pi = forbid_search(p, se.X, se.forbidden, se.options,
                            &se.last_stats, se.graph.get());
    if (!pi) {
      int before = se.X.canonical_count();
      new_parameters(se.X, p);
      ++se.new_parameter_calls;
      bool grew = se.X.canonical_count() > before;
      pi = forbid_search(p, se.X, se.forbidden, se.options, &se.last_stats,
                         se.graph.get());
      if (!pi) {
        // No canonical growth means the action space is final: nothing
        // new can appear, so further shortfall iterations are futile.
        if (!grew) break;
        continue;
      }
    }
    se.forbidden.insert(strip_continuous(*pi));
    out.push_back(std::move(*pi));
  }
  return out;
}

}  // namespace pigi

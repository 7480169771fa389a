#include "sphfib/homotopy.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace sphfib {

std::size_t AbGroup::index_of(const std::string& g) const {
  for (std::size_t i = 0; i < gens.size(); ++i)
    if (gens[i] == g) return i;
  throw std::out_of_range("no group generator named " + g);
}

std::size_t SphereTable::src_index(const std::string& name) const {
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i].name == name) return i;
  throw std::out_of_range("no source class named " + name);
}

const SourceClass& SphereTable::src_class(const std::string& name) const {
  return src[src_index(name)];
}

const IntVec& SphereTable::compose_coords(const std::string& c,
                                          const std::string& gamma) const {
  auto it = compose.find(c + "|" + gamma);
  if (it == compose.end())
    throw NormalizeError("no applicable rule: composition " + c + " o " + gamma);
  return it->second;
}

SphereTable SphereTable::from_kv(const KvFile& f, int sign_variant) {
  SphereTable t;
  t.regime = f.get("regime").as_str();
  t.n = static_cast<int>(f.get("n").as_int().convert_to<long long>());
  if (t.n < 2 || t.n % 2 != 0) throw std::invalid_argument("table n must be even");
  t.sign_variant = sign_variant;

  auto names = f.get("src_gens").as_list();
  auto orders = f.get("src_orders").as_int_vec();
  auto hopf = f.get("src_hopf").as_int_vec();
  if (names.size() != orders.size() || names.size() != hopf.size())
    throw std::invalid_argument("table: src fields size mismatch");
  for (std::size_t i = 0; i < names.size(); ++i) {
    SourceClass c;
    c.name = names[i].as_str();
    c.order = orders[i];
    c.hopf = hopf[i];
    c.suspension = f.get("suspension." + c.name).as_int_vec();
    t.src.push_back(std::move(c));
  }
  for (const auto& g : f.get("top_gens").as_list()) t.top.gens.push_back(g.as_str());
  t.top.orders = f.get("top_orders").as_int_vec();
  for (const auto& g : f.get("mid_gens").as_list()) t.mid.gens.push_back(g.as_str());
  t.mid.orders = f.get("mid_orders").as_int_vec();
  t.whitehead_square = f.get("whitehead_square").as_int_vec();

  t.has_sign_variants = f.has("triple_whitehead.plus");
  const std::string suffix =
      t.has_sign_variants ? (sign_variant >= 0 ? ".plus" : ".minus") : "";
  t.triple_whitehead = f.get("triple_whitehead" + suffix).as_int_vec();
  for (const auto& c : t.src) {
    std::string key = "bracket_iota." + c.name;
    const KvValue* v = f.find(key + suffix);
    if (!v) v = f.find(key);
    if (!v) throw std::invalid_argument("table: missing " + key);
    t.bracket_iota[c.name] = v->as_int_vec();
  }
  for (const auto& c : t.src)
    for (const auto& m : t.mid.gens) {
      std::string key = "compose." + c.name + "." + m;
      const KvValue* v = f.find(key + suffix);
      if (!v) v = f.find(key);
      if (v) t.compose[c.name + "|" + m] = v->as_int_vec();
    }
  return t;
}

SphereTable SphereTable::load(const std::string& path, int sign_variant) {
  return from_kv(KvFile::load(path), sign_variant);
}

WhiteheadExpr WhiteheadExpr::zero() { return WhiteheadExpr{}; }

WhiteheadExpr WhiteheadExpr::alpha(int i) {
  WhiteheadExpr e;
  e.kind = Kind::alpha;
  e.sphere = i;
  return e;
}

WhiteheadExpr WhiteheadExpr::named(std::string cls, int i) {
  WhiteheadExpr e;
  e.kind = Kind::named;
  e.cls = std::move(cls);
  e.sphere = i;
  return e;
}

WhiteheadExpr WhiteheadExpr::sum(std::vector<WhiteheadExpr> parts) {
  WhiteheadExpr e;
  e.kind = Kind::sum;
  e.children = std::move(parts);
  return e;
}

WhiteheadExpr WhiteheadExpr::scale(LocalScalar c, WhiteheadExpr x) {
  WhiteheadExpr e;
  e.kind = Kind::scale;
  e.coeff = std::move(c);
  e.children.push_back(std::move(x));
  return e;
}

WhiteheadExpr WhiteheadExpr::scale(long long c, WhiteheadExpr x) {
  return scale(LocalScalar(Integer(c), PrimeSet{}), std::move(x));
}

WhiteheadExpr WhiteheadExpr::bracket(WhiteheadExpr a, WhiteheadExpr b) {
  WhiteheadExpr e;
  e.kind = Kind::bracket;
  e.children.push_back(std::move(a));
  e.children.push_back(std::move(b));
  return e;
}

WhiteheadExpr WhiteheadExpr::compose(WhiteheadExpr x, IntVec mid_coords) {
  WhiteheadExpr e;
  e.kind = Kind::compose;
  e.mid_coords = std::move(mid_coords);
  e.children.push_back(std::move(x));
  return e;
}

WhiteheadExpr WhiteheadExpr::compose_named(WhiteheadExpr x, const SphereTable& t,
                                           const std::string& gamma) {
  IntVec v(t.mid.size(), Integer(0));
  v[t.mid.index_of(gamma)] = 1;
  return compose(std::move(x), std::move(v));
}

WhiteheadExpr WhiteheadExpr::compose_suspended(WhiteheadExpr x, const SphereTable& t,
                                               const std::string& src_class) {
  return compose(std::move(x), t.src_class(src_class).suspension);
}

WhiteheadExpr WhiteheadExpr::operator+(const WhiteheadExpr& o) const {
  return sum({*this, o});
}

std::string WhiteheadExpr::str() const {
  switch (kind) {
    case Kind::zero:
      return "0";
    case Kind::alpha:
      return "a" + std::to_string(sphere + 1);
    case Kind::named:
      return cls + "_" + std::to_string(sphere + 1);
    case Kind::sum: {
      std::string s = "(";
      for (std::size_t i = 0; i < children.size(); ++i)
        s += (i ? " + " : "") + children[i].str();
      return s + ")";
    }
    case Kind::scale:
      return coeff.str() + "*" + children[0].str();
    case Kind::bracket:
      return "[" + children[0].str() + ", " + children[1].str() + "]";
    case Kind::compose: {
      std::string s = children[0].str() + " o (";
      for (std::size_t i = 0; i < mid_coords.size(); ++i)
        s += (i ? "," : "") + mid_coords[i].str();
      return s + ")";
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Hilton basis

std::string HiltonBasis::slot_key(const Slot& s) {
  std::ostringstream os;
  os << static_cast<int>(s.type) << ":" << s.i << ":" << s.j << ":" << s.l << ":" << s.gen;
  return os.str();
}

std::shared_ptr<const HiltonBasis> HiltonBasis::make(const SphereTable& t, int k,
                                                     int degree_kind, const PrimeSet& s) {
  auto b = std::make_shared<HiltonBasis>();
  b->degree_kind = degree_kind;
  b->k = k;
  auto push = [&](Slot slot) {
    b->index[slot_key(slot)] = b->slots.size();
    b->slots.push_back(std::move(slot));
  };
  if (degree_kind == 1) {
    for (int i = 0; i < k; ++i)
      for (std::size_t c = 0; c < t.src.size(); ++c)
        push({SlotType::sphere_src, i, -1, -1, t.src[c].name, s.strip(t.src[c].order)});
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) push({SlotType::pair, i, j, -1, "", Integer(0)});
  } else if (degree_kind == 2) {
    for (int i = 0; i < k; ++i)
      for (std::size_t c = 0; c < t.top.size(); ++c)
        push({SlotType::sphere_top, i, -1, -1, t.top.gens[c], s.strip(t.top.orders[c])});
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        for (std::size_t c = 0; c < t.mid.size(); ++c)
          push({SlotType::pair_mid, i, j, -1, t.mid.gens[c], s.strip(t.mid.orders[c])});
    // Hall words [[a,b],c] with a < b, c >= a (the length-3 Lyndon brackets).
    for (int a = 0; a < k; ++a)
      for (int bb = a + 1; bb < k; ++bb)
        for (int c = a; c < k; ++c) push({SlotType::hall3, a, bb, c, "", Integer(0)});
  } else {
    throw std::invalid_argument("degree_kind must be 1 or 2");
  }
  return b;
}

std::size_t HiltonBasis::slot(SlotType type, int i, int j, int l,
                              const std::string& gen) const {
  Slot s{type, i, j, l, gen, Integer(0)};
  auto it = index.find(slot_key(s));
  if (it == index.end()) throw std::logic_error("missing Hilton slot");
  return it->second;
}

bool HiltonVector::is_zero() const {
  for (const auto& c : coords)
    if (!c.is_zero()) return false;
  return true;
}

bool HiltonVector::operator==(const HiltonVector& o) const {
  if (!basis || !o.basis || basis->degree_kind != o.basis->degree_kind ||
      basis->k != o.basis->k || basis->slots.size() != o.basis->slots.size())
    return false;
  return coords == o.coords;
}

namespace {

LocalScalar reduce_slot(const LocalScalar& v, const Integer& order, const PrimeSet& s) {
  if (order == 0) return v;
  if (order == 1) return LocalScalar(Integer(0), s);
  // v = num/den with den coprime to the reduced order; fold to [0, order).
  Integer den = v.denominator() % order;
  if (den < 0) den += order;
  // modular inverse by extended Euclid
  Integer t0 = 0, t1 = 1, r0 = order, r1 = den;
  while (r1 != 0) {
    Integer q = r0 / r1;
    Integer tmp = t0 - q * t1;
    t0 = t1;
    t1 = tmp;
    tmp = r0 - q * r1;
    r0 = r1;
    r1 = tmp;
  }
  if (r0 != 1) throw std::logic_error("slot order not coprime to denominator");
  Integer inv = t0 % order;
  if (inv < 0) inv += order;
  Integer r = (v.numerator() % order) * inv % order;
  if (r < 0) r += order;
  return LocalScalar(r, s);
}

}  // namespace

HiltonVector HiltonVector::operator+(const HiltonVector& o) const {
  if (!(basis == o.basis || (basis && o.basis && basis->slots.size() == o.basis->slots.size())))
    throw std::invalid_argument("Hilton basis mismatch");
  HiltonVector r{basis, coords};
  for (std::size_t i = 0; i < coords.size(); ++i) {
    r.coords[i] = coords[i] + o.coords[i];
    r.coords[i] = reduce_slot(r.coords[i], basis->slots[i].order, r.coords[i].primes());
  }
  return r;
}

HiltonVector HiltonVector::operator-(const HiltonVector& o) const {
  HiltonVector neg = o;
  for (std::size_t i = 0; i < neg.coords.size(); ++i) {
    neg.coords[i] = -neg.coords[i];
    neg.coords[i] = reduce_slot(neg.coords[i], basis->slots[i].order, neg.coords[i].primes());
  }
  return *this + neg;
}

std::string HiltonVector::str() const {
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (coords[i].is_zero()) continue;
    const auto& s = basis->slots[i];
    os << (first ? "" : " + ") << "(" << coords[i].str() << ")*";
    switch (s.type) {
      case HiltonBasis::SlotType::sphere_src:
      case HiltonBasis::SlotType::sphere_top:
        os << s.gen << "_" << s.i + 1;
        break;
      case HiltonBasis::SlotType::pair:
        os << "[a" << s.i + 1 << ",a" << s.j + 1 << "]";
        break;
      case HiltonBasis::SlotType::pair_mid:
        os << "[a" << s.i + 1 << ",a" << s.j + 1 << "]o" << s.gen;
        break;
      case HiltonBasis::SlotType::hall3:
        os << "[[a" << s.i + 1 << ",a" << s.j + 1 << "],a" << s.l + 1 << "]";
        break;
    }
    first = false;
  }
  return first ? "0" : os.str();
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class T { alpha, named, pair, top, pair_mid, hall, bra, comp };
  T t;
  int i = -1, j = -1, l = -1;
  std::string g;
  NodePtr a, b;
  IntVec mid;

  bool terminal() const { return t != T::bra && t != T::comp; }
  std::string str() const {
    switch (t) {
      case T::alpha:
        return "a" + std::to_string(i + 1);
      case T::named:
        return g + "_" + std::to_string(i + 1);
      case T::pair:
        return "[a" + std::to_string(i + 1) + ",a" + std::to_string(j + 1) + "]";
      case T::top:
        return g + "_" + std::to_string(i + 1);
      case T::pair_mid:
        return "[a" + std::to_string(i + 1) + ",a" + std::to_string(j + 1) + "]o" + g;
      case T::hall:
        return "[[a" + std::to_string(i + 1) + ",a" + std::to_string(j + 1) + "],a" +
               std::to_string(l + 1) + "]";
      case T::bra:
        return "[" + a->str() + ", " + b->str() + "]";
      case T::comp:
        return a->str() + " o (mid)";
    }
    return "?";
  }
};

NodePtr mk_alpha(int i) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::alpha;
  n->i = i;
  return n;
}
NodePtr mk_named(const std::string& c, int i) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::named;
  n->g = c;
  n->i = i;
  return n;
}
NodePtr mk_pair(int i, int j) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::pair;
  n->i = std::min(i, j);
  n->j = std::max(i, j);
  return n;
}
NodePtr mk_top(const std::string& g, int i) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::top;
  n->g = g;
  n->i = i;
  return n;
}
NodePtr mk_pair_mid(int i, int j, const std::string& g) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::pair_mid;
  n->i = std::min(i, j);
  n->j = std::max(i, j);
  n->g = g;
  return n;
}
NodePtr mk_hall(int a, int b, int c) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::hall;
  n->i = a;
  n->j = b;
  n->l = c;
  return n;
}
NodePtr mk_bra(NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::bra;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}
NodePtr mk_comp(NodePtr a, IntVec mid) {
  auto n = std::make_shared<Node>();
  n->t = Node::T::comp;
  n->a = std::move(a);
  n->mid = std::move(mid);
  return n;
}

struct Item {
  LocalScalar coeff;
  NodePtr node;
};

using Expansion = std::vector<std::pair<Integer, NodePtr>>;

// [[a_x,a_y],a_z] with x != y, straightened into the Hall slots (a<b, c>=a).
Expansion hall_straighten(int x, int y, int z) {
  int a = std::min(x, y), b = std::max(x, y);
  if (z >= a) return {{Integer(1), mk_hall(a, b, z)}};
  // Jacobi (all generators in even degree): [[a,b],z] = -[[z,a],b] - [[z,b],a]
  return {{Integer(-1), mk_hall(z, a, b)}, {Integer(-1), mk_hall(z, b, a)}};
}

Expansion reduce_leaf(const Node& nd, const SphereTable& t) {
  using T = Node::T;
  if (nd.t == T::bra) {
    const Node& x = *nd.a;
    const Node& y = *nd.b;
    // n even: brackets of the shapes below commute, so order is free.
    if (x.t == T::alpha && y.t == T::alpha) {
      if (x.i != y.i) return {{Integer(1), mk_pair(x.i, y.i)}};
      Expansion out;
      for (std::size_t c = 0; c < t.src.size(); ++c)
        if (t.whitehead_square[c] != 0)
          out.push_back({t.whitehead_square[c], mk_named(t.src[c].name, x.i)});
      return out;
    }
    const Node* al = nullptr;
    const Node* nm = nullptr;
    if (x.t == T::alpha && y.t == T::named) {
      al = &x;
      nm = &y;
    } else if (x.t == T::named && y.t == T::alpha) {
      al = &y;
      nm = &x;
    }
    if (al && nm) {
      const SourceClass& c = t.src_class(nm->g);
      if (al->i == nm->i) {
        auto it = t.bracket_iota.find(c.name);
        if (it == t.bracket_iota.end())
          throw NormalizeError("no applicable rule: [" + c.name + ", iota]");
        Expansion out;
        for (std::size_t g = 0; g < t.top.size(); ++g)
          if (it->second[g] != 0) out.push_back({it->second[g], mk_top(t.top.gens[g], al->i)});
        return out;
      }
      // [c_j, a_i] = [a_j, a_i] o E^{n-1}c - H(c) [[a_j, a_i], a_j]
      Expansion out;
      for (std::size_t g = 0; g < t.mid.size(); ++g)
        if (c.suspension[g] != 0)
          out.push_back({c.suspension[g], mk_pair_mid(nm->i, al->i, t.mid.gens[g])});
      if (c.hopf != 0)
        for (auto& [s, h] : hall_straighten(nm->i, al->i, nm->i))
          out.push_back({-c.hopf * s, std::move(h)});
      return out;
    }
    const Node* pr = nullptr;
    al = nullptr;
    if (x.t == T::alpha && y.t == T::pair) {
      al = &x;
      pr = &y;
    } else if (x.t == T::pair && y.t == T::alpha) {
      al = &y;
      pr = &x;
    }
    if (al && pr) return hall_straighten(pr->i, pr->j, al->i);
    throw NormalizeError("bracket out of the modeled degree range: " + nd.str());
  }
  if (nd.t == T::comp) {
    const Node& x = *nd.a;
    if (x.t == T::pair) {
      Expansion out;
      for (std::size_t g = 0; g < nd.mid.size(); ++g)
        if (nd.mid[g] != 0)
          out.push_back({nd.mid[g], mk_pair_mid(x.i, x.j, t.mid.gens[g])});
      return out;
    }
    if (x.t == T::named) {
      Expansion out;
      for (std::size_t g = 0; g < nd.mid.size(); ++g) {
        if (nd.mid[g] == 0) continue;
        const IntVec& cc = t.compose_coords(x.g, t.mid.gens[g]);
        for (std::size_t s = 0; s < t.top.size(); ++s)
          if (cc[s] != 0) out.push_back({nd.mid[g] * cc[s], mk_top(t.top.gens[s], x.i)});
      }
      return out;
    }
    throw NormalizeError("no applicable rule: composition with " + x.str());
  }
  throw std::logic_error("reduce_leaf on terminal node");
}

// One small step. Children of composite nodes reduce first, so different
// application orders explore genuinely different intermediate sums.
Expansion reduce_step(const NodePtr& n, const SphereTable& t) {
  if (n->t == Node::T::bra) {
    if (!n->a->terminal()) {
      Expansion inner = reduce_step(n->a, t);
      Expansion out;
      for (auto& [c, m] : inner) out.push_back({c, mk_bra(m, n->b)});
      return out;
    }
    if (!n->b->terminal()) {
      Expansion inner = reduce_step(n->b, t);
      Expansion out;
      for (auto& [c, m] : inner) out.push_back({c, mk_bra(n->a, m)});
      return out;
    }
    return reduce_leaf(*n, t);
  }
  if (n->t == Node::T::comp) {
    if (!n->a->terminal()) {
      Expansion inner = reduce_step(n->a, t);
      Expansion out;
      for (auto& [c, m] : inner) out.push_back({c, mk_comp(m, n->mid)});
      return out;
    }
    return reduce_leaf(*n, t);
  }
  throw std::logic_error("reduce_step on terminal node");
}

void flatten(const WhiteheadExpr& e, const LocalScalar& c, const PrimeSet& s,
             std::vector<Item>& out) {
  switch (e.kind) {
    case WhiteheadExpr::Kind::zero:
      return;
    case WhiteheadExpr::Kind::alpha:
      out.push_back({c, mk_alpha(e.sphere)});
      return;
    case WhiteheadExpr::Kind::named:
      out.push_back({c, mk_named(e.cls, e.sphere)});
      return;
    case WhiteheadExpr::Kind::sum:
      for (const auto& ch : e.children) flatten(ch, c, s, out);
      return;
    case WhiteheadExpr::Kind::scale: {
      LocalScalar cc = c * LocalScalar(e.coeff.numerator(), e.coeff.denominator(), s);
      if (cc.is_zero()) return;
      flatten(e.children[0], cc, s, out);
      return;
    }
    case WhiteheadExpr::Kind::bracket: {
      std::vector<Item> l, r;
      flatten(e.children[0], LocalScalar(Integer(1), s), s, l);
      flatten(e.children[1], LocalScalar(Integer(1), s), s, r);
      for (const auto& a : l)
        for (const auto& b : r) out.push_back({c * a.coeff * b.coeff, mk_bra(a.node, b.node)});
      return;
    }
    case WhiteheadExpr::Kind::compose: {
      std::vector<Item> l;
      flatten(e.children[0], c, s, l);
      for (auto& a : l) out.push_back({a.coeff, mk_comp(a.node, e.mid_coords)});
      return;
    }
  }
}

// Degree bookkeeping: returns 0 for the zero expression, else the degree.
int expr_degree(const WhiteheadExpr& e, int n) {
  switch (e.kind) {
    case WhiteheadExpr::Kind::zero:
      return 0;
    case WhiteheadExpr::Kind::alpha:
      return n;
    case WhiteheadExpr::Kind::named:
      return 2 * n - 1;
    case WhiteheadExpr::Kind::scale:
      return expr_degree(e.children[0], n);
    case WhiteheadExpr::Kind::sum: {
      int d = 0;
      for (const auto& ch : e.children) {
        int dc = expr_degree(ch, n);
        if (dc == 0) continue;
        if (d == 0) d = dc;
        if (d != dc) throw NormalizeError("mixed-degree sum");
      }
      return d;
    }
    case WhiteheadExpr::Kind::bracket: {
      int d1 = expr_degree(e.children[0], n);
      int d2 = expr_degree(e.children[1], n);
      if (d1 == 0 || d2 == 0) return 0;
      return d1 + d2 - 1;
    }
    case WhiteheadExpr::Kind::compose: {
      int d = expr_degree(e.children[0], n);
      if (d == 0) return 0;
      if (d != 2 * n - 1)
        throw NormalizeError("composition expects a degree 2n-1 left factor");
      return 3 * n - 2;
    }
  }
  return 0;
}

struct Accumulator {
  const SphereTable& t;
  const PrimeSet& s;
  std::shared_ptr<const HiltonBasis> basis;
  std::vector<LocalScalar> coords;

  Accumulator(const SphereTable& t_, const PrimeSet& s_,
              std::shared_ptr<const HiltonBasis> b)
      : t(t_), s(s_), basis(std::move(b)),
        coords(basis->slots.size(), LocalScalar(Integer(0), s_)) {}

  void add(const LocalScalar& c, const Node& n) {
    using ST = HiltonBasis::SlotType;
    std::size_t idx;
    switch (n.t) {
      case Node::T::named:
        if (basis->degree_kind != 1) throw NormalizeError("degree mismatch at " + n.str());
        idx = basis->slot(ST::sphere_src, n.i, -1, -1, n.g);
        break;
      case Node::T::pair:
        if (basis->degree_kind != 1) throw NormalizeError("degree mismatch at " + n.str());
        idx = basis->slot(ST::pair, n.i, n.j, -1, "");
        break;
      case Node::T::top:
        if (basis->degree_kind != 2) throw NormalizeError("degree mismatch at " + n.str());
        idx = basis->slot(ST::sphere_top, n.i, -1, -1, n.g);
        break;
      case Node::T::pair_mid:
        if (basis->degree_kind != 2) throw NormalizeError("degree mismatch at " + n.str());
        idx = basis->slot(ST::pair_mid, n.i, n.j, -1, n.g);
        break;
      case Node::T::hall:
        if (basis->degree_kind != 2) throw NormalizeError("degree mismatch at " + n.str());
        idx = basis->slot(ST::hall3, n.i, n.j, n.l, "");
        break;
      case Node::T::alpha:
        throw NormalizeError("bare degree-n class cannot be normalized: " + n.str());
      default:
        throw std::logic_error("accumulate on reducible node");
    }
    coords[idx] += c;
  }

  HiltonVector finish() {
    for (std::size_t i = 0; i < coords.size(); ++i)
      coords[i] = reduce_slot(coords[i], basis->slots[i].order, s);
    return HiltonVector{basis, std::move(coords)};
  }
};

HiltonVector run_normalize(const WhiteheadExpr& e, const SphereTable& t, int k,
                           const PrimeSet& s, std::mt19937_64* rng) {
  int deg = expr_degree(e, t.n);
  int kind = 2;
  if (deg == 2 * t.n - 1) kind = 1;
  else if (deg == 3 * t.n - 2 || deg == 0) kind = 2;
  else
    throw NormalizeError("expression degree " + std::to_string(deg) +
                         " is not 2n-1 or 3n-2");

  Accumulator acc(t, s, HiltonBasis::make(t, k, kind, s));
  std::vector<Item> work;
  flatten(e, LocalScalar(Integer(1), s), s, work);
  for (const auto& it : work) {
    // index sanity: all spheres within range
    std::function<void(const Node&)> chk = [&](const Node& n) {
      if ((n.t == Node::T::alpha || n.t == Node::T::named) && (n.i < 0 || n.i >= k))
        throw NormalizeError("sphere index out of range in " + n.str());
      if (n.a) chk(*n.a);
      if (n.b) chk(*n.b);
    };
    chk(*it.node);
  }

  while (!work.empty()) {
    std::size_t pick = 0;
    if (rng) {
      std::vector<std::size_t> reducible;
      for (std::size_t i = 0; i < work.size(); ++i)
        if (!work[i].node->terminal()) reducible.push_back(i);
      if (reducible.empty()) {
        for (auto& it : work) acc.add(it.coeff, *it.node);
        work.clear();
        break;
      }
      pick = reducible[(*rng)() % reducible.size()];
    } else {
      // deterministic: first item; terminals retire immediately
      if (work.back().node->terminal()) {
        acc.add(work.back().coeff, *work.back().node);
        work.pop_back();
        continue;
      }
      pick = work.size() - 1;
    }
    Item it = work[pick];
    work.erase(work.begin() + static_cast<std::ptrdiff_t>(pick));
    if (it.node->terminal()) {
      acc.add(it.coeff, *it.node);
      continue;
    }
    for (auto& [c, m] : reduce_step(it.node, t))
      work.push_back({it.coeff * LocalScalar(c, s), m});
  }
  return acc.finish();
}

}  // namespace

HiltonVector normalize(const WhiteheadExpr& e, const SphereTable& t, int k,
                       const PrimeSet& s) {
  return run_normalize(e, t, k, s, nullptr);
}

HiltonVector normalize_randomized(const WhiteheadExpr& e, const SphereTable& t, int k,
                                  const PrimeSet& s, std::mt19937_64& rng) {
  return run_normalize(e, t, k, s, &rng);
}

// ---------------------------------------------------------------------------
// Kernel subgroup and membership

KernelSubgroup kernel_subgroup(const WhiteheadExpr& L, const SphereTable& t, int k,
                               const PrimeSet& s) {
  KernelSubgroup K;
  K.basis = HiltonBasis::make(t, k, 2, s);
  for (int i = 0; i < k; ++i) {
    K.gens.push_back(normalize(WhiteheadExpr::bracket(L, WhiteheadExpr::alpha(i)), t, k, s));
    K.gen_labels.push_back("[L, a" + std::to_string(i + 1) + "]");
  }
  for (std::size_t g = 0; g < t.mid.size(); ++g) {
    IntVec v(t.mid.size(), Integer(0));
    v[g] = 1;
    K.gens.push_back(normalize(WhiteheadExpr::compose(L, v), t, k, s));
    K.gen_labels.push_back("L o " + t.mid.gens[g]);
  }
  return K;
}

std::optional<std::vector<LocalScalar>> in_kernel(const HiltonVector& v,
                                                  const KernelSubgroup& K) {
  if (!v.basis || v.basis->slots.size() != K.basis->slots.size())
    throw std::invalid_argument("kernel membership: basis mismatch");
  const std::size_t rows = K.basis->slots.size();
  std::vector<std::size_t> finite;
  for (std::size_t r = 0; r < rows; ++r)
    if (K.basis->slots[r].order > 1) finite.push_back(r);

  const PrimeSet& s = v.coords.empty() ? PrimeSet{} : v.coords[0].primes();
  LocalMatrix A;
  A.rows = rows;
  A.cols = K.gens.size() + finite.size();
  A.primes = s;
  A.e.assign(A.rows * A.cols, LocalScalar(Integer(0), s));
  for (std::size_t c = 0; c < K.gens.size(); ++c)
    for (std::size_t r = 0; r < rows; ++r) A.at(r, c) = K.gens[c].coords[r];
  for (std::size_t f = 0; f < finite.size(); ++f)
    A.at(finite[f], K.gens.size() + f) =
        LocalScalar(K.basis->slots[finite[f]].order, s);

  auto sol = solve_linear(A, v.coords);
  if (!sol) return std::nullopt;
  sol->resize(K.gens.size(), LocalScalar(Integer(0), s));
  return sol;
}

// ---------------------------------------------------------------------------
// Bounded searches

std::string SearchSolution::str(const SphereTable& t) const {
  std::ostringstream os;
  os << "mu = " << m1 << "*a1 + " << m2 << "*a2; delta =";
  std::size_t d = 0;
  for (int sph = 0; sph < 2; ++sph)
    for (const auto& c : t.src) {
      if (delta[d] != 0) os << " + " << delta[d] << "*" << c.name << "_" << sph + 1;
      ++d;
    }
  if (pair_coeff != 0) os << " + " << pair_coeff << "*[a1,a2]";
  return os.str();
}

std::vector<SearchSolution> bounded_search(const SphereTable& t, const WhiteheadExpr& L,
                                           const IntMatrix& g, const PrimeSet& s,
                                           const BoundedSearchOptions& opt) {
  if (g.rows() != 2) throw std::invalid_argument("bounded_search handles k = 2 only");
  const int k = 2;
  KernelSubgroup K = kernel_subgroup(L, t, k, s);
  const std::size_t rows = K.basis->slots.size();

  // Kernel membership via one integer SNF of [gens | order relations].
  std::vector<std::size_t> finite;
  for (std::size_t r = 0; r < rows; ++r)
    if (K.basis->slots[r].order > 1) finite.push_back(r);
  IntMatrix A(rows, K.gens.size() + finite.size());
  for (std::size_t c = 0; c < K.gens.size(); ++c)
    for (std::size_t r = 0; r < rows; ++r) {
      const LocalScalar& x = K.gens[c].coords[r];
      if (!x.is_integer()) throw std::logic_error("bounded_search expects integral kernel");
      A.at(r, c) = x.numerator();
    }
  for (std::size_t f = 0; f < finite.size(); ++f)
    A.at(finite[f], K.gens.size() + f) = K.basis->slots[finite[f]].order;
  SmithResult snf = smith_normal_form(A);

  auto member = [&](const IntVec& v) {
    IntVec y = mat_vec(snf.U, v);
    std::size_t lim = std::min(A.rows(), A.cols());
    for (std::size_t i = 0; i < rows; ++i) {
      Integer d = i < lim ? snf.D.at(i, i) : Integer(0);
      if (d == 0) {
        if (y[i] != 0) return false;
      } else if (y[i] % d != 0) {
        return false;
      }
    }
    return true;
  };

  // Basic bracket vectors, precomputed once.
  const std::size_t nsrc = t.src.size();
  std::vector<std::vector<IntVec>> bra(2, std::vector<IntVec>(2 * nsrc));
  std::vector<IntVec> brap(2);
  auto to_int = [&](const HiltonVector& h) {
    IntVec v(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!h.coords[r].is_integer()) throw std::logic_error("non-integral coordinate");
      v[r] = h.coords[r].numerator();
    }
    return v;
  };
  for (int i = 0; i < 2; ++i) {
    for (int sph = 0; sph < 2; ++sph)
      for (std::size_t c = 0; c < nsrc; ++c)
        bra[static_cast<std::size_t>(i)][static_cast<std::size_t>(sph) * nsrc + c] =
            to_int(normalize(WhiteheadExpr::bracket(WhiteheadExpr::alpha(i),
                                                    WhiteheadExpr::named(t.src[c].name, sph)),
                             t, k, s));
    brap[static_cast<std::size_t>(i)] = to_int(normalize(
        WhiteheadExpr::bracket(WhiteheadExpr::alpha(i),
                               WhiteheadExpr::bracket(WhiteheadExpr::alpha(0),
                                                      WhiteheadExpr::alpha(1))),
        t, k, s));
  }

  // Loop-homology side condition: [relation | w a_1 | w a_2 | rho(delta)]
  // must be a basis of the four degree-(2n-2) words. Native integers keep the
  // per-candidate cost negligible; every entry is bounded by the search bound.
  long long gll[4] = {g.at(0, 0).convert_to<long long>(), g.at(0, 1).convert_to<long long>(),
                      g.at(1, 0).convert_to<long long>(), g.at(1, 1).convert_to<long long>()};
  std::vector<long long> hopf_ll;
  for (const auto& c : t.src) hopf_ll.push_back(c.hopf.convert_to<long long>());
  auto det4 = [](const long long m[4][4]) {
    long long det = 0;
    int perm_rows[4] = {0, 1, 2, 3};
    // Laplace along the first column of 3x3 minors, fully unrolled via loops.
    for (int r0 = 0; r0 < 4; ++r0) {
      int rs[3], t3 = 0;
      for (int r = 0; r < 4; ++r)
        if (r != r0) rs[t3++] = perm_rows[r];
      long long minor = m[rs[0]][1] * (m[rs[1]][2] * m[rs[2]][3] - m[rs[1]][3] * m[rs[2]][2]) -
                        m[rs[0]][2] * (m[rs[1]][1] * m[rs[2]][3] - m[rs[1]][3] * m[rs[2]][1]) +
                        m[rs[0]][3] * (m[rs[1]][1] * m[rs[2]][2] - m[rs[1]][2] * m[rs[2]][1]);
      det += ((r0 % 2 == 0) ? 1 : -1) * m[r0][0] * minor;
    }
    return det;
  };
  auto side_ok = [&](long long m1, long long m2, const std::vector<long long>& d,
                     long long f) {
    long long M[4][4] = {};
    // words a1a1, a1a2, a2a1, a2a2; l = -sum g_ij a_i a_j
    M[0][0] = -gll[0];
    M[1][0] = -gll[1];
    M[2][0] = -gll[2];
    M[3][0] = -gll[3];
    // w a_1, w a_2 with w = m1 a1 + m2 a2
    M[0][1] = m1;
    M[2][1] = m2;
    M[1][2] = m1;
    M[3][2] = m2;
    // rho(delta) = -sum_{sph,c} d_{sph,c} H(c) a_sph a_sph - f (a1a2 + a2a1)
    long long d00 = 0, d11 = 0;
    for (std::size_t c = 0; c < nsrc; ++c) {
      d00 -= d[c] * hopf_ll[c];
      d11 -= d[nsrc + c] * hopf_ll[c];
    }
    M[0][3] = d00;
    M[3][3] = d11;
    M[1][3] = -f;
    M[2][3] = -f;
    long long det = det4(M);
    return det == 1 || det == -1;
  };

  std::vector<SearchSolution> found;
  const long long B = opt.bound;
  std::vector<long long> d(2 * nsrc, -B);
  IntVec acc(rows);
  for (long long m1 = 0; m1 <= B; ++m1)
    for (long long m2 = -B; m2 <= B; ++m2) {
      if (m1 == 0 && m2 <= 0) continue;  // canonical sign of (mu)
      if (gcd(Integer(m1), Integer(m2)) != 1) continue;
      std::fill(d.begin(), d.end(), -B);
      bool more = true;
      while (more) {
        for (long long f = -B; f <= B; ++f) {
          if (opt.require_side_conditions && !side_ok(m1, m2, d, f)) continue;
          for (auto& x : acc) x = 0;
          for (int i = 0; i < 2; ++i) {
            long long mi = i == 0 ? m1 : m2;
            if (mi == 0) continue;
            for (std::size_t c = 0; c < 2 * nsrc; ++c) {
              if (d[c] == 0) continue;
              const IntVec& v = bra[static_cast<std::size_t>(i)][c];
              for (std::size_t r = 0; r < rows; ++r) acc[r] += mi * d[c] * v[r];
            }
            if (f != 0) {
              const IntVec& v = brap[static_cast<std::size_t>(i)];
              for (std::size_t r = 0; r < rows; ++r) acc[r] += mi * f * v[r];
            }
          }
          if (!member(acc)) continue;
          SearchSolution sol;
          sol.m1 = m1;
          sol.m2 = m2;
          sol.delta = d;
          sol.pair_coeff = f;
          found.push_back(std::move(sol));
          if (found.size() >= opt.max_solutions) return found;
        }
        // advance the delta odometer
        more = false;
        for (std::size_t c = 0; c < d.size(); ++c) {
          if (d[c] < B) {
            ++d[c];
            more = true;
            break;
          }
          d[c] = -B;
        }
      }
    }
  return found;
}

PrincipalScanResult principal_s3_scan(const Integer& l1, const Integer& l2,
                                      long long bound) {
  for (long long n1 = -bound; n1 <= bound; ++n1)
    for (long long n2 = -bound; n2 <= bound; ++n2) {
      if (n1 == 0 && n2 == 0) continue;
      if (gcd(Integer(n1), Integer(n2)) != 1) continue;
      Integer img = Integer(n1) * n2 + l1 * n1 + l2 * n2;
      if (img % 12 == 0) return {true, n1, n2};
    }
  return {false, 0, 0};
}

}  // namespace sphfib

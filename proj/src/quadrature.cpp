#include "ricci/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

namespace ricci {

void QuadratureScheme::validate() const {
  if (order < 2) throw ConfigError("quadrature.order", "must be >= 2");
  if (!(rel_tol >= 0)) throw ConfigError("quadrature.rel_tol", "must be non-negative");
  if (!(abs_tol > 0)) throw ConfigError("quadrature.abs_tol", "must be positive");
  if (max_depth < 1) throw ConfigError("quadrature.max_depth", "must be >= 1");
  if (!(shell_ratio > 0 && shell_ratio < 1)) throw ConfigError("quadrature.shell_ratio", "must lie in (0, 1)");
  if (!(r_min_factor > 0)) throw ConfigError("quadrature.r_min_factor", "must be positive");
  if (max_shells < 1) throw ConfigError("quadrature.max_shells", "must be >= 1");
  if (!(refine_fraction > 0 && refine_fraction <= 1))
    throw ConfigError("quadrature.refine_fraction", "must lie in (0, 1]");
}

Integrand scalar_integrand(std::function<double(const Point&)> f) {
  return Integrand{1, [f = std::move(f)](const Point& x, std::span<double> out) { out[0] = f(x); }};
}

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  const int p = order;
  nodes.assign(p, 0.0);
  weights.assign(p, 0.0);
  for (int i = 0; i < (p + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (p + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= p; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = p * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= p; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = p * (x * p1 - p0) / (x * x - 1.0);
    }
    nodes[i] = -x;
    nodes[p - 1 - i] = x;
    weights[i] = weights[p - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

unsigned worker_threads() {
  if (const char* env = std::getenv("RICCI_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

namespace {

using Acc = std::array<double, kMaxComponents>;

struct Rule {
  std::vector<double> x, w;
};

const Rule& rule_for(int order) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    Rule r;
    gauss_legendre(order, r.x, r.w);
    it = cache.emplace(order, std::move(r)).first;
  }
  return it->second;
}

struct Cell {
  Box box;
  int depth = 0;
  int stratum = -1;
  int shell = -1;
  Acc value{};
  Acc err{};
};

void apply_rule(const Integrand& f, const Rule& r, const Box& b, Acc& out) {
  const std::size_t n = b.dim();
  const std::size_t m = f.components;
  const std::size_t p = r.x.size();
  Point half(n), mid(n);
  double jac = 1.0;
  for (std::size_t a = 0; a < n; ++a) {
    half[a] = 0.5 * (b.hi[a] - b.lo[a]);
    mid[a] = 0.5 * (b.hi[a] + b.lo[a]);
    jac *= half[a];
  }
  out.fill(0.0);
  std::array<std::size_t, kMaxDim> idx{};
  std::array<double, kMaxComponents> buf{};
  Point x(n);
  while (true) {
    double w = jac;
    for (std::size_t a = 0; a < n; ++a) {
      x[a] = mid[a] + half[a] * r.x[idx[a]];
      w *= r.w[idx[a]];
    }
    buf.fill(0.0);
    f.eval(x, std::span<double>(buf.data(), m));
    for (std::size_t c = 0; c < m; ++c) {
      if (!std::isfinite(buf[c])) throw IntegrandFailureError(x);
      out[c] += w * buf[c];
    }
    std::size_t a = 0;
    while (a < n && ++idx[a] == p) idx[a++] = 0;
    if (a == n) break;
  }
}

std::vector<Box> children(const Box& b) {
  const std::size_t n = b.dim();
  std::vector<Box> out;
  out.reserve(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    Box c = b;
    for (std::size_t a = 0; a < n; ++a) {
      const double m = 0.5 * (b.lo[a] + b.hi[a]);
      if (mask & (std::size_t{1} << a))
        c.lo[a] = m;
      else
        c.hi[a] = m;
    }
    out.push_back(c);
  }
  return out;
}

void evaluate_cell(const Integrand& f, const Rule& r, Cell& c) {
  Acc coarse{}, fine{}, part{};
  apply_rule(f, r, c.box, coarse);
  for (const Box& ch : children(c.box)) {
    apply_rule(f, r, ch, part);
    for (std::size_t k = 0; k < f.components; ++k) fine[k] += part[k];
  }
  for (std::size_t k = 0; k < f.components; ++k) {
    c.value[k] = fine[k];
    c.err[k] = std::abs(fine[k] - coarse[k]);
  }
}

/// Evaluates cells[first, last) with up to worker_threads() threads. The first
/// exception by cell index is rethrown so failures are deterministic.
void evaluate_batch(const Integrand& f, const Rule& r, std::vector<Cell>& cells, std::size_t first,
                    std::size_t last) {
  const std::size_t count = last - first;
  if (count == 0) return;
  const unsigned threads = std::min<std::size_t>(worker_threads(), std::max<std::size_t>(1, count / 4));
  if (threads <= 1) {
    for (std::size_t i = first; i < last; ++i) evaluate_cell(f, r, cells[i]);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::size_t> error_at(threads, std::numeric_limits<std::size_t>::max());
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = first + t; i < last; i += threads) {
        try {
          evaluate_cell(f, r, cells[i]);
        } catch (...) {
          errors[t] = std::current_exception();
          error_at[t] = i;
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::exception_ptr e;
  for (unsigned t = 0; t < threads; ++t)
    if (errors[t] && error_at[t] < best) {
      best = error_at[t];
      e = errors[t];
    }
  if (e) std::rethrow_exception(e);
}

struct Plan {
  const Stratum* s = nullptr;
  double R0 = 0.0;
  std::vector<Box> regions;
};

void split_by_breaks(const Box& b, const Breakpoints& breaks, int stratum, int shell, std::vector<Cell>& out) {
  const std::size_t n = b.dim();
  std::vector<std::vector<double>> cuts(n);
  for (std::size_t a = 0; a < n; ++a) {
    cuts[a].push_back(b.lo[a]);
    if (a < breaks.size())
      for (double t : breaks[a]) {
        const double tol = 1e-12 * (b.hi[a] - b.lo[a]);
        if (t > b.lo[a] + tol && t < b.hi[a] - tol) cuts[a].push_back(t);
      }
    cuts[a].push_back(b.hi[a]);
    std::sort(cuts[a].begin(), cuts[a].end());
  }
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    Cell c;
    c.box = b;
    for (std::size_t a = 0; a < n; ++a) {
      c.box.lo[a] = cuts[a][idx[a]];
      c.box.hi[a] = cuts[a][idx[a] + 1];
    }
    c.stratum = stratum;
    c.shell = shell;
    out.push_back(c);
    std::size_t a = 0;
    while (a < n && ++idx[a] == cuts[a].size() - 1) idx[a++] = 0;
    if (a == n) break;
  }
}

/// Assigns every sub-box of `b` either to no stratum (regular) or to exactly
/// one stratum by splitting between pairs of separable strata.
void partition(const Box& b, const std::vector<std::size_t>& active, std::vector<Plan>& plans,
               std::vector<Box>& regular) {
  std::vector<std::size_t> here;
  for (std::size_t i : active)
    if (plans[i].s->intersects(b)) here.push_back(i);
  if (here.empty()) {
    regular.push_back(b);
    return;
  }
  if (here.size() == 1) {
    plans[here[0]].regions.push_back(b);
    return;
  }
  for (std::size_t u = 0; u < here.size(); ++u)
    for (std::size_t v = u + 1; v < here.size(); ++v) {
      const Stratum& s1 = *plans[here[u]].s;
      const Stratum& s2 = *plans[here[v]].s;
      for (std::size_t c : s1.constrained_axes) {
        if (std::find(s2.constrained_axes.begin(), s2.constrained_axes.end(), c) == s2.constrained_axes.end())
          continue;
        if (s1.anchor[c] == s2.anchor[c]) continue;
        const double m = 0.5 * (s1.anchor[c] + s2.anchor[c]);
        if (!(m > b.lo[c] && m < b.hi[c])) continue;
        Box left = b, right = b;
        left.hi[c] = m;
        right.lo[c] = m;
        partition(left, here, plans, regular);
        partition(right, here, plans, regular);
        return;
      }
    }
  throw UnsupportedGeometryError("strata '" + plans[here[0]].s->label + "' and '" + plans[here[1]].s->label +
                                 "' cannot be separated by an axis-aligned cut");
}

void shell_boxes(const Box& region, const Stratum& s, double ro, double ri, std::vector<Box>& out) {
  const std::size_t m = s.constrained_axes.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < m; ++i) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    bool all_middle = true;
    Box b = region;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t seg = rest % 3;
      rest /= 3;
      const std::size_t c = s.constrained_axes[i];
      const double a = s.anchor[c];
      double lo, hi;
      if (seg == 0) {
        lo = a - ro;
        hi = a - ri;
        all_middle = false;
      } else if (seg == 1) {
        lo = a - ri;
        hi = a + ri;
      } else {
        lo = a + ri;
        hi = a + ro;
        all_middle = false;
      }
      b.lo[c] = std::max(b.lo[c], lo);
      b.hi[c] = std::min(b.hi[c], hi);
    }
    if (all_middle || b.empty()) continue;
    out.push_back(b);
  }
}

template <class Pred>
Acc ordered_sum(const std::vector<Cell>& cells, std::size_t m, bool use_err, Pred pred) {
  Acc s{}, comp{};
  for (const Cell& c : cells) {
    if (!pred(c)) continue;
    for (std::size_t k = 0; k < m; ++k) {
      // Neumaier summation
      const double v = use_err ? c.err[k] : c.value[k];
      const double t = s[k] + v;
      if (std::abs(s[k]) >= std::abs(v))
        comp[k] += (s[k] - t) + v;
      else
        comp[k] += (v - t) + s[k];
      s[k] = t;
    }
  }
  for (std::size_t k = 0; k < m; ++k) s[k] += comp[k];
  return s;
}

}  // namespace

IntegralResult integrate(const Integrand& f, const Box& box, const QuadratureScheme& scheme,
                         const SingularSet& singular, const Breakpoints& breaks) {
  scheme.validate();
  const std::size_t m = f.components;
  if (m == 0 || m > kMaxComponents) throw Error("integrand component count must be in [1, 8]");
  if (box.empty()) {
    IntegralResult r;
    r.values.assign(m, 0.0);
    r.errors.assign(m, 0.0);
    r.converged = true;
    return r;
  }
  const std::size_t n = box.dim();
  const Rule& rule = rule_for(scheme.order);
  const double rho = scheme.shell_ratio;
  const double r_min = scheme.r_min_factor * box.diagonal();

  std::vector<Plan> plans;
  for (const Stratum& s : singular.strata) {
    if (s.constrained_axes.empty())
      throw UnsupportedGeometryError("stratum '" + s.label + "' is not axis aligned");
    if (!s.intersects(box)) continue;
    Plan p;
    p.s = &s;
    for (std::size_t c : s.constrained_axes)
      p.R0 = std::max({p.R0, s.anchor[c] - box.lo[c], box.hi[c] - s.anchor[c]});
    plans.push_back(p);
  }
  std::vector<std::size_t> all(plans.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<Box> regular;
  partition(box, all, plans, regular);

  std::vector<Cell> cells;
  for (const Box& b : regular) split_by_breaks(b, breaks, -1, -1, cells);
  evaluate_batch(f, rule, cells, 0, cells.size());

  // Shells are generated outward-in; generation stops at r_min, at the shell
  // cap, or once the geometric tail is negligible against the running total.
  std::vector<int> shell_count(plans.size(), 0);
  for (std::size_t pi = 0; pi < plans.size(); ++pi) {
    Plan& p = plans[pi];
    std::vector<Acc> sums;
    for (int k = 0; k < scheme.max_shells; ++k) {
      const double ro = p.R0 * std::pow(rho, k);
      const double ri = ro * rho;
      const std::size_t first = cells.size();
      for (const Box& region : p.regions) {
        std::vector<Box> boxes;
        shell_boxes(region, *p.s, ro, ri, boxes);
        for (const Box& b : boxes) split_by_breaks(b, breaks, static_cast<int>(pi), k, cells);
      }
      evaluate_batch(f, rule, cells, first, cells.size());
      Acc s{};
      for (std::size_t i = first; i < cells.size(); ++i)
        for (std::size_t c = 0; c < m; ++c) s[c] += cells[i].value[c];
      sums.push_back(s);
      shell_count[pi] = k + 1;
      if (ri <= r_min) break;
      if (k + 1 >= scheme.min_shells && k >= 1) {
        const Acc total = ordered_sum(cells, m, false, [](const Cell&) { return true; });
        bool negligible = true;
        for (std::size_t c = 0; c < m; ++c) {
          const double a = std::abs(sums[k][c]), b = std::abs(sums[k - 1][c]);
          const double tol = combined_tolerance(scheme, total[c]);
          if (a == 0.0) continue;
          if (!(a < 0.95 * b)) {
            negligible = false;
            break;
          }
          const double q = a / b;
          if (a * q / (1.0 - q) > 1e-3 * tol) {
            negligible = false;
            break;
          }
        }
        if (negligible) break;
      }
    }
  }

  auto tails = [&](std::vector<Acc>& tail, std::vector<Acc>& tail_err, std::vector<bool>& unbounded) {
    tail.assign(plans.size(), Acc{});
    tail_err.assign(plans.size(), Acc{});
    unbounded.assign(plans.size(), false);
    for (std::size_t pi = 0; pi < plans.size(); ++pi) {
      const int K = shell_count[pi];
      if (K < 2) continue;
      const int last = K - 1;
      const Acc sK = ordered_sum(cells, m, false, [&](const Cell& c) {
        return c.stratum == static_cast<int>(pi) && c.shell == last;
      });
      const Acc sK1 = ordered_sum(cells, m, false, [&](const Cell& c) {
        return c.stratum == static_cast<int>(pi) && c.shell == last - 1;
      });
      for (std::size_t c = 0; c < m; ++c) {
        if (sK[c] == 0.0) continue;
        const double q = sK[c] / sK1[c];
        if (q > 0 && q < 0.999) {
          tail[pi][c] = sK[c] * q / (1.0 - q);
          tail_err[pi][c] = std::abs(tail[pi][c]);
        } else {
          tail_err[pi][c] = std::abs(sK[c]);
          if (std::abs(sK[c]) >= std::abs(sK1[c]) && std::abs(sK[c]) > scheme.abs_tol) unbounded[pi] = true;
        }
      }
    }
  };

  IntegralResult res;
  std::vector<Acc> tail, tail_err;
  std::vector<bool> unbounded;
  bool depth_exhausted = false;
  while (true) {
    tails(tail, tail_err, unbounded);
    Acc total = ordered_sum(cells, m, false, [](const Cell&) { return true; });
    Acc err = ordered_sum(cells, m, true, [](const Cell&) { return true; });
    Acc tol{}, target{};
    bool done = true, reachable = true;
    for (std::size_t c = 0; c < m; ++c) {
      double terr = 0.0;
      for (std::size_t pi = 0; pi < plans.size(); ++pi) {
        total[c] += tail[pi][c];
        terr += tail_err[pi][c];
      }
      tol[c] = combined_tolerance(scheme, total[c]);
      target[c] = std::max(tol[c] - terr, 0.1 * tol[c]);
      if (terr > tol[c]) reachable = false;
      if (err[c] > target[c]) done = false;
    }
    if (done) {
      res.converged = reachable;
      break;
    }
    if (cells.size() >= scheme.max_cells) {
      res.budget_exhausted = true;
      break;
    }
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].depth >= scheme.max_depth) continue;
      double key = 0.0;
      for (std::size_t c = 0; c < m; ++c) key = std::max(key, cells[i].err[c] / target[c]);
      if (key > 0) keyed.emplace_back(key, i);
    }
    if (keyed.empty()) {
      depth_exhausted = true;
      break;
    }
    const std::size_t kids = std::size_t{1} << n;
    std::size_t want = std::max<std::size_t>(1, static_cast<std::size_t>(scheme.refine_fraction * cells.size()));
    want = std::min(want, keyed.size());
    want = std::min(want, std::max<std::size_t>(1, (scheme.max_cells - cells.size()) / (kids - 1 + (kids == 1))));
    auto cmp = [](const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    };
    std::nth_element(keyed.begin(), keyed.begin() + (want - 1), keyed.end(), cmp);
    keyed.resize(want);
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    const std::size_t first_new = cells.size();
    std::vector<std::size_t> replaced;
    for (const auto& [key, i] : keyed) {
      (void)key;
      const Cell parent = cells[i];
      std::vector<Box> ch = children(parent.box);
      for (std::size_t j = 0; j < ch.size(); ++j) {
        Cell c;
        c.box = ch[j];
        c.depth = parent.depth + 1;
        c.stratum = parent.stratum;
        c.shell = parent.shell;
        if (j == 0) {
          cells[i] = c;
          replaced.push_back(i);
        } else {
          cells.push_back(c);
        }
      }
    }
    for (std::size_t i : replaced) evaluate_cell(f, rule, cells[i]);
    evaluate_batch(f, rule, cells, first_new, cells.size());
  }
  (void)depth_exhausted;

  const Acc total = ordered_sum(cells, m, false, [](const Cell&) { return true; });
  const Acc err = ordered_sum(cells, m, true, [](const Cell&) { return true; });
  res.values.assign(m, 0.0);
  res.errors.assign(m, 0.0);
  bool any_unbounded = false;
  for (std::size_t c = 0; c < m; ++c) {
    res.values[c] = total[c];
    res.errors[c] = err[c];
    for (std::size_t pi = 0; pi < plans.size(); ++pi) {
      res.values[c] += tail[pi][c];
      res.errors[c] += tail_err[pi][c];
      any_unbounded = any_unbounded || unbounded[pi];
    }
  }
  if (any_unbounded) res.converged = false;
  for (std::size_t c = 0; c < m; ++c)
    if (res.errors[c] > combined_tolerance(scheme, res.values[c])) res.converged = false;
  res.value = res.values[0];
  res.error = res.errors[0];
  res.cells = cells.size();
  const std::size_t per_rule = static_cast<std::size_t>(std::pow(rule.x.size(), n));
  res.evaluations = cells.size() * per_rule * ((std::size_t{1} << n) + 1);

  for (std::size_t pi = 0; pi < plans.size(); ++pi) {
    ShellTrace t;
    t.label = plans[pi].s->label;
    t.R0 = plans[pi].R0;
    t.ratio = rho;
    t.sums.assign(shell_count[pi], std::vector<double>(m, 0.0));
    t.errors.assign(shell_count[pi], std::vector<double>(m, 0.0));
    for (int k = 0; k < shell_count[pi]; ++k) {
      t.radius.push_back(plans[pi].R0 * std::pow(rho, k));
      const auto pred = [&](const Cell& c) { return c.stratum == static_cast<int>(pi) && c.shell == k; };
      const Acc s = ordered_sum(cells, m, false, pred);
      const Acc e = ordered_sum(cells, m, true, pred);
      for (std::size_t c = 0; c < m; ++c) {
        t.sums[k][c] = s[c];
        t.errors[k][c] = e[c];
      }
    }
    t.tail.assign(tail[pi].begin(), tail[pi].begin() + m);
    res.shells.push_back(std::move(t));
  }
  return res;
}

double integrate_1d(const std::function<double(double)>& f, double a, double b, const QuadratureScheme& s,
                    const std::vector<double>& breaks, double* error) {
  if (!(b > a)) {
    if (error) *error = 0.0;
    return 0.0;
  }
  const IntegralResult r =
      integrate(scalar_integrand([&f](const Point& x) { return f(x[0]); }), Box{Point{a}, Point{b}}, s, {},
                Breakpoints{breaks});
  if (error) *error = r.error;
  return r.value;
}

// ---------------------------------------------------------------- verdicts

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::converges: return "converges";
    case Verdict::diverges: return "diverges";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

Verdict worst(Verdict a, Verdict b) {
  if (a == Verdict::diverges || b == Verdict::diverges) return Verdict::diverges;
  if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
  return Verdict::converges;
}

ShellFit fit_shells(const std::vector<double>& sums, double ratio, double floor) {
  ShellFit fit;
  fit.sums = sums;
  const std::size_t K = sums.size();
  const std::size_t start = K > 8 ? K - 8 : 0;
  std::vector<double> xs, ys;
  for (std::size_t k = start; k < K; ++k) {
    if (std::abs(sums[k]) <= floor) continue;
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(std::abs(sums[k])));
  }
  if (xs.size() < 3) {
    // The innermost shells have dropped below the floor: the tail is negligible.
    bool small_tail = true;
    for (std::size_t k = start; k < K; ++k) small_tail = small_tail && std::abs(sums[k]) <= floor;
    if (K >= 3 && (small_tail || std::abs(sums.back()) <= floor)) {
      fit.verdict = Verdict::converges;
      fit.vanishing = true;
      return fit;
    }
    fit.verdict = Verdict::inconclusive;
    return fit;
  }
  const double nn = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nn;
  my /= nn;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  double ssr = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (my + fit.slope * (xs[i] - mx));
    ssr += r * r;
  }
  fit.slope_sigma = xs.size() > 2 ? std::sqrt(ssr / (nn - 2.0) / sxx) : 0.0;
  fit.exponent = fit.slope / std::log(1.0 / ratio);
  if (fit.slope < -0.05) {
    fit.verdict = Verdict::converges;
  } else if (fit.slope >= -std::max(2.0 * fit.slope_sigma, 0.005)) {
    fit.verdict = Verdict::diverges;
    fit.exponent = std::max(0.0, fit.exponent);
  } else {
    fit.verdict = Verdict::inconclusive;
  }
  return fit;
}

void christoffel_diagnostic_terms(const Christoffel& g, double out[3]) {
  const std::size_t n = g.size();
  out[0] = g.abs_sum();
  out[1] = g.square_sum();
  double tr[kMaxDim] = {};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) tr[i] += g(j, j, i);
  double q = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += g(i, k, l) * tr[i];
        for (std::size_t j = 0; j < n; ++j) s -= g(j, k, i) * g(i, l, j);
      }
      q += std::abs(s);
    }
  out[2] = q;
}

IntegrabilityVerdict integrability_diagnostic(const ChristoffelField& gamma, const QuadratureScheme& scheme,
                                              const Box* box) {
  const Box domain = box ? *box : gamma.chart.domain;
  QuadratureScheme s = scheme;
  s.rel_tol = std::max(scheme.rel_tol, 1e-4);
  s.max_shells = 16;
  s.min_shells = 16;
  const SingularSet sing = gamma.singular.restricted_to(domain);
  Integrand f{3, [&gamma](const Point& x, std::span<double> out) {
                double t[3];
                christoffel_diagnostic_terms(gamma.at(x), t);
                out[0] = t[0];
                out[1] = t[1];
                out[2] = t[2];
              }};
  const IntegralResult r = integrate(f, domain, s, sing);
  IntegrabilityVerdict v;
  v.gamma_l1_integral = r.values[0];
  v.gamma_l2_integral = r.values[1];
  v.quadratic_integral = r.values[2];
  for (const ShellTrace& t : r.shells) {
    StratumVerdict sv;
    sv.label = t.label;
    std::vector<double> c0, c1, c2;
    for (const auto& row : t.sums) {
      c0.push_back(row[0]);
      c1.push_back(row[1]);
      c2.push_back(row[2]);
    }
    sv.gamma_l1 = fit_shells(c0, t.ratio, s.abs_tol);
    sv.gamma_l2 = fit_shells(c1, t.ratio, s.abs_tol);
    sv.quadratic = fit_shells(c2, t.ratio, s.abs_tol);
    v.gamma_l1 = worst(v.gamma_l1, sv.gamma_l1.verdict);
    v.gamma_l2 = worst(v.gamma_l2, sv.gamma_l2.verdict);
    v.quadratic = worst(v.quadratic, sv.quadratic.verdict);
    v.strata.push_back(std::move(sv));
  }
  return v;
}

}  // namespace ricci

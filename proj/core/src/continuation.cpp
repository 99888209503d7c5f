#include "bifinfer/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "bifinfer/detail/kernels.hpp"
#include "bifinfer/geometry.hpp"
#include "bifinfer/rng.hpp"
#include "eigen_span.hpp"

namespace bifinfer::continuation {

namespace {

Eigen::VectorXd rhs(const ModelDef& m, const ParameterVector& th, const Eigen::VectorXd& z) {
  Eigen::VectorXd out(m.state_dim);
  eval_rhs<double>(m, cspan(z), cspan(th.values), std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

dense::Matrix<double> jac(const ModelDef& m, const ParameterVector& th, const Eigen::VectorXd& z) {
  return detail::jacobian_z<double>(m, cspan(z), cspan(th.values));
}

Eigen::VectorXd solve(const dense::Matrix<double>& a, const Eigen::VectorXd& b, bool& ok) {
  auto f = dense::lu_factor(a);
  ok = !(f.singular || f.min_pivot <= 1e-14 * f.max_pivot);
  Eigen::VectorXd x(b.size());
  if (!ok) return x;
  dense::Matrix<double> rhs_m(static_cast<std::size_t>(b.size()), 1);
  for (Eigen::Index i = 0; i < b.size(); ++i) rhs_m(static_cast<std::size_t>(i), 0) = b[i];
  const auto sol = dense::lu_solve(f, rhs_m);
  for (Eigen::Index i = 0; i < b.size(); ++i) x[i] = sol(static_cast<std::size_t>(i), 0);
  ok = x.allFinite();
  return x;
}

// Packed-coordinate corrector; returns nullopt instead of throwing so the
// tracer can back off cheaply.
struct CorrectResult {
  Eigen::VectorXd z;
  bool ok = false;
  bool singular = false;
  double residual = 0.0;
};

CorrectResult correct(const ModelDef& m, const ParameterVector& th, const Eigen::VectorXd& guess,
                      const Eigen::VectorXd& direction, double tol, int max_iterations) {
  const Eigen::Index n = m.state_dim;
  const Eigen::VectorXd d = direction / direction.norm();
  CorrectResult out;
  Eigen::VectorXd z = guess;
  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n + 1);
    r.head(n) = rhs(m, th, x);
    r[n] = (x - guess).dot(d);
    return r;
  };
  Eigen::VectorXd r = residual(z);
  for (int it = 0; it <= max_iterations; ++it) {
    if (!r.allFinite()) break;
    out.residual = r.head(n).lpNorm<Eigen::Infinity>();
    if (out.residual <= tol && std::abs(r[n]) <= 1e-12 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
      out.z = z;
      out.ok = true;
      return out;
    }
    if (it == max_iterations) break;
    const auto j = jac(m, th, z);
    dense::Matrix<double> a(static_cast<std::size_t>(n + 1), static_cast<std::size_t>(n + 1));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k <= n; ++k)
        a(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) = j(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    for (Eigen::Index k = 0; k <= n; ++k) a(static_cast<std::size_t>(n), static_cast<std::size_t>(k)) = d[k];
    bool ok = false;
    const Eigen::VectorXd step = solve(a, -r, ok);
    if (!ok) {
      out.singular = true;
      return out;
    }
    const double merit = r.norm();
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 10; ++k, lambda *= 0.5) {
      const Eigen::VectorXd trial = z + lambda * step;
      const Eigen::VectorXd rt = residual(trial);
      if (rt.allFinite() && (rt.norm() < merit || rt.head(n).lpNorm<Eigen::Infinity>() <= tol)) {
        z = trial;
        r = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return out;
}

bool inside(const Eigen::VectorXd& z, const StateBox& box, Interval window, double slack = 0.0) {
  const Eigen::Index n = z.size() - 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = box.bounds[static_cast<std::size_t>(i)];
    if (z[i] < b.lo - slack || z[i] > b.hi + slack) return false;
  }
  return z[n] >= window.lo - slack && z[n] <= window.hi + slack;
}

Interval bound_of(const StateBox& box, Interval window, Eigen::Index k, Eigen::Index n) {
  return k == n ? window : box.bounds[static_cast<std::size_t>(k)];
}

double segment_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& x) {
  const Eigen::VectorXd ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (x - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - x).norm();
}

struct Tracer {
  const ModelDef& model;
  const ParameterVector& theta;
  const TraceSettings& settings;
  StateBox box;
  Interval window;

  Eigen::VectorXd oriented_tangent(const Eigen::VectorXd& z, const Eigen::VectorXd& ref) const {
    Eigen::VectorXd t = geometry::tangent_qr(model, theta, StatePoint::from_z(z));
    if (t.dot(ref) < 0.0) t = -t;
    return t;
  }

  // Lands on the face crossed by the segment inside -> outside.
  std::optional<std::pair<Eigen::VectorXd, int>> clip(const Eigen::VectorXd& in, Eigen::VectorXd out) const {
    const Eigen::Index n = in.size() - 1;
    for (Eigen::Index attempt = 0; attempt <= n; ++attempt) {
      double best = 2.0;
      Eigen::Index face = -1;
      double value = 0.0;
      for (Eigen::Index k = 0; k <= n; ++k) {
        const Interval b = bound_of(box, window, k, n);
        const double target = out[k] < b.lo ? b.lo : (out[k] > b.hi ? b.hi : NAN);
        if (std::isnan(target)) continue;
        const double denom = out[k] - in[k];
        const double frac = denom != 0.0 ? (target - in[k]) / denom : 0.0;
        if (frac < best) {
          best = frac;
          face = k;
          value = target;
        }
      }
      if (face < 0) return std::nullopt;
      Eigen::VectorXd guess = in + std::clamp(best, 0.0, 1.0) * (out - in);
      guess[face] = value;
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n + 1);
      e[face] = 1.0;
      auto c = correct(model, theta, guess, e, settings.corrector_tol, settings.max_corrector_iterations);
      if (!c.ok) return std::nullopt;
      c.z[face] = value;
      if (inside(c.z, box, window, 1e-12)) return std::make_pair(c.z, static_cast<int>(face));
      out = c.z;
    }
    return std::nullopt;
  }

  struct March {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> points;  // (z, unit tangent along travel)
    int face = -1;
    bool truncated = false;
    bool closed = false;
  };

  March march(const Eigen::VectorXd& start, const Eigen::VectorXd& start_tangent, int budget) const {
    March res;
    Eigen::VectorXd z = start;
    Eigen::VectorXd t = start_tangent;
    const double h = settings.step;
    double traveled = 0.0;

    // A start on the boundary heading outward ends immediately.
    {
      const Eigen::Index n = z.size() - 1;
      for (Eigen::Index k = 0; k <= n; ++k) {
        const Interval b = bound_of(box, window, k, n);
        if ((z[k] <= b.lo && t[k] < 0.0) || (z[k] >= b.hi && t[k] > 0.0)) {
          res.face = static_cast<int>(k);
          return res;
        }
      }
    }

    while (static_cast<int>(res.points.size()) < budget) {
      double step = h;
      bool success = false;
      Eigen::VectorXd z_new;
      Eigen::VectorXd t_new;
      for (int attempt = 0; attempt <= settings.max_backoff; ++attempt, step *= 0.5) {
        const Eigen::VectorXd pred = z + step * t;
        auto c = correct(model, theta, pred, t, settings.corrector_tol, settings.max_corrector_iterations);
        if (!c.ok) continue;
        if ((c.z - z).norm() > 2.0 * step) continue;
        try {
          t_new = oriented_tangent(c.z, t);
        } catch (const DegenerateGeometryError&) {
          continue;
        }
        if (t_new.dot(t) < 0.9) continue;
        z_new = c.z;
        success = true;
        break;
      }
      if (!success) {
        res.truncated = true;
        return res;
      }
      if (!inside(z_new, box, window)) {
        auto clipped = clip(z, z_new);
        if (!clipped) {
          res.truncated = true;
          return res;
        }
        const auto& [zb, face] = *clipped;
        if ((zb - z).norm() > 1e-12 * (1.0 + z.norm())) {
          Eigen::VectorXd tb;
          try {
            tb = oriented_tangent(zb, t);
          } catch (const DegenerateGeometryError&) {
            res.truncated = true;
            return res;
          }
          res.points.emplace_back(zb, tb);
        }
        res.face = face;
        return res;
      }
      if (traveled > 2.0 * h && segment_distance(z, z_new, start) < 0.5 * h && t_new.dot(start_tangent) > 0.0) {
        res.closed = true;
        return res;
      }
      traveled += (z_new - z).norm();
      res.points.emplace_back(z_new, t_new);
      z = z_new;
      t = t_new;
    }
    res.truncated = true;
    return res;
  }

  void annotate(BranchSample& s, long index) const {
    const Eigen::VectorXd z = s.z.z();
    detail::MeasureParts<double> parts;
    if (!detail::measure_parts<double>(model, cspan(z), cspan(theta.values), cspan(s.tangent), settings.eps_den, {},
                                       parts)) {
      throw DegenerateGeometryError("cannot annotate sample", index);
    }
    s.det = parts.det;
    s.slope = parts.slope;
    s.measure = parts.phi;
  }

  BranchSample make_sample(const Eigen::VectorXd& z, const Eigen::VectorXd& t) const {
    BranchSample s;
    s.z = StatePoint::from_z(z);
    s.tangent = t;
    return s;
  }

  // Locates the zero of det (or of d det/ds) between samples a and b on the curve.
  std::optional<BranchSample> locate_kink(const BranchSample& a, const BranchSample& b, Kink kind) const {
    const Eigen::VectorXd za = a.z.z();
    const Eigen::VectorXd zb = b.z.z();
    const Eigen::VectorXd chord = zb - za;
    auto value = [&](const BranchSample& s) { return kind == Kink::det_zero ? s.det : s.slope; };
    double t0 = 0.0, g0 = value(a);
    double t1 = 1.0, g1 = value(b);
    const double scale = std::max(std::abs(g0), std::abs(g1));
    std::optional<BranchSample> best;
    int side = 0;
    for (int it = 0; it < 80; ++it) {
      const double t = (t0 * g1 - t1 * g0) / (g1 - g0);
      auto c = correct(model, theta, za + t * chord, chord, settings.corrector_tol, settings.max_corrector_iterations);
      if (!c.ok) return best;
      BranchSample s;
      try {
        s = make_sample(c.z, oriented_tangent(c.z, a.tangent));
        annotate(s, -1);
      } catch (const DegenerateGeometryError&) {
        return best;
      }
      const double g = value(s);
      best = s;
      if (std::abs(g) <= 1e-15 * scale || t1 - t0 <= 1e-15) break;
      if ((g > 0.0) == (g1 > 0.0)) {
        t1 = t;
        g1 = g;
        if (side == -1) g0 *= 0.5;
        side = -1;
      } else {
        t0 = t;
        g0 = g;
        if (side == 1) g1 *= 0.5;
        side = 1;
      }
    }
    if (best) best->kink = kind;
    return best;
  }

  void insert_kinks(Branch& b) const {
    std::vector<BranchSample> out;
    out.reserve(b.samples.size() + 8);
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
      if (i > 0) {
        const auto& a = b.samples[i - 1];
        const auto& c = b.samples[i];
        std::vector<std::pair<double, BranchSample>> found;
        const double chord2 = (c.z.z() - a.z.z()).squaredNorm();
        auto add = [&](Kink kind) {
          auto s = locate_kink(a, c, kind);
          if (!s) return;
          const double t = chord2 > 0.0 ? (s->z.z() - a.z.z()).dot(c.z.z() - a.z.z()) / chord2 : 0.0;
          if (t <= 1e-9 || t >= 1.0 - 1e-9) return;
          found.emplace_back(t, *s);
        };
        if (a.det * c.det < 0.0 && std::abs(a.det) > 1e-12 && std::abs(c.det) > 1e-12) add(Kink::det_zero);
        if (a.slope * c.slope < 0.0) add(Kink::slope_zero);
        std::sort(found.begin(), found.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (auto& f : found) out.push_back(std::move(f.second));
      }
      out.push_back(b.samples[i]);
    }
    b.samples = std::move(out);
  }

  static void recompute_ds(Branch& b) {
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
      b.samples[i].ds = i == 0 ? 0.0 : (b.samples[i].z.z() - b.samples[i - 1].z.z()).norm();
    }
  }

  static void reverse(Branch& b) {
    std::reverse(b.samples.begin(), b.samples.end());
    for (auto& s : b.samples) {
      s.tangent = -s.tangent;
      s.slope = -s.slope;
    }
    std::swap(b.start_face, b.end_face);
  }

  std::optional<Branch> trace_from(const Eigen::VectorXd& z0) const {
    Eigen::VectorXd t0;
    try {
      t0 = geometry::tangent_qr(model, theta, StatePoint::from_z(z0));
    } catch (const DegenerateGeometryError&) {
      return std::nullopt;
    }
    Branch b;
    const int budget = settings.max_samples - 1;
    March fwd = march(z0, t0, budget);
    if (fwd.closed) {
      b.samples.push_back(make_sample(z0, t0));
      for (auto& [z, t] : fwd.points) b.samples.push_back(make_sample(z, t));
      b.samples.push_back(make_sample(z0, t0));
      b.closed = true;
    } else {
      March bwd = march(z0, -t0, budget - static_cast<int>(fwd.points.size()));
      for (auto it = bwd.points.rbegin(); it != bwd.points.rend(); ++it) b.samples.push_back(make_sample(it->first, -it->second));
      b.samples.push_back(make_sample(z0, t0));
      for (auto& [z, t] : fwd.points) b.samples.push_back(make_sample(z, t));
      b.start_face = bwd.face;
      b.end_face = fwd.face;
      b.truncated = fwd.truncated || bwd.truncated;
    }
    if (b.samples.size() < 2) return std::nullopt;
    const Eigen::Index pidx = static_cast<Eigen::Index>(model.state_dim);
    if (b.samples.front().tangent[pidx] < 0.0) {
      std::reverse(b.samples.begin(), b.samples.end());
      for (auto& s : b.samples) s.tangent = -s.tangent;
      std::swap(b.start_face, b.end_face);
    }
    for (std::size_t i = 0; i < b.samples.size(); ++i) annotate(b.samples[i], static_cast<long>(i));
    if (settings.insert_kinks) insert_kinks(b);
    recompute_ds(b);
    return b;
  }
};

}  // namespace

std::vector<Eigen::VectorXd> find_roots_deflated(const ModelDef& model, const ParameterVector& theta, double p0,
                                                 const TraceSettings& settings) {
  const Eigen::Index n = model.state_dim;
  const StateBox box = model.box(theta);
  const int count = std::max(1, settings.root_seeds);

  // Latin hypercube in the state box.
  rng::CounterStream stream(settings.seed, 0);
  std::vector<Eigen::VectorXd> seeds(static_cast<std::size_t>(count), Eigen::VectorXd(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    std::vector<int> perm(static_cast<std::size_t>(count));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = count - 1; i > 0; --i) {
      const int j = static_cast<int>(stream.uniform() * (i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(std::min(j, i))]);
    }
    const auto& b = box.bounds[static_cast<std::size_t>(k)];
    for (int i = 0; i < count; ++i) {
      seeds[static_cast<std::size_t>(i)][k] = b.lo + (perm[static_cast<std::size_t>(i)] + stream.uniform()) / count * b.width();
    }
  }

  const double tol = settings.corrector_tol;
  std::vector<Eigen::VectorXd> found;    // every converged root, used for deflation
  std::vector<Eigen::VectorXd> accepted; // roots inside the box

  auto residual = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd z(n + 1);
    z.head(n) = u;
    z[n] = p0;
    return rhs(model, theta, z);
  };
  auto state_jac = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd z(n + 1);
    z.head(n) = u;
    z[n] = p0;
    const auto j = jac(model, theta, z);
    dense::Matrix<double> out(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k) out(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) = j(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    return out;
  };
  auto deflation = [&](const Eigen::VectorXd& u, Eigen::VectorXd* grad_log) {
    double m = 1.0;
    if (grad_log) grad_log->setZero(n);
    for (const auto& r : found) {
      const Eigen::VectorXd diff = u - r;
      const double d2 = diff.squaredNorm();
      const double f = 1.0 / d2 + 1.0;
      m *= f;
      if (grad_log) *grad_log += -2.0 * diff / (d2 * d2 * f);
    }
    return m;
  };
  double span = 0.0;
  for (const auto& b : box.bounds) span = std::max(span, b.width());

  for (const auto& seed : seeds) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      Eigen::VectorXd u = seed;
      bool converged = false;
      for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd f = residual(u);
        if (!f.allFinite()) break;
        if (f.lpNorm<Eigen::Infinity>() <= tol) {
          converged = true;
          break;
        }
        Eigen::VectorXd gl;
        const double m = deflation(u, &gl);
        if (!std::isfinite(m)) break;
        // d(mF)/du = m (J + F gl^T); the factor m cancels in the Newton step.
        auto a = state_jac(u);
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index k = 0; k < n; ++k) a(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) += f[i] * gl[k];
        bool ok = false;
        const Eigen::VectorXd step = solve(a, -f, ok);
        if (!ok) break;
        const double merit = m * f.norm();
        double lambda = 1.0;
        Eigen::VectorXd next = u + step;
        for (int k = 0; k < 12; ++k, lambda *= 0.5) {
          next = u + lambda * step;
          const Eigen::VectorXd fn = residual(next);
          if (fn.allFinite() && deflation(next, nullptr) * fn.norm() < merit) break;
        }
        u = next;
        if (!u.allFinite() || u.lpNorm<Eigen::Infinity>() > 1e3 * (1.0 + span)) break;
      }
      if (!converged) break;
      // Polish on the undeflated system.
      for (int it = 0; it < 3; ++it) {
        bool ok = false;
        const Eigen::VectorXd step = solve(state_jac(u), -residual(u), ok);
        if (!ok) break;
        const Eigen::VectorXd next = u + step;
        if (residual(next).lpNorm<Eigen::Infinity>() <= residual(u).lpNorm<Eigen::Infinity>()) u = next;
      }
      bool distinct = true;
      for (const auto& r : found) {
        if ((u - r).norm() <= settings.root_separation) {
          distinct = false;
          break;
        }
      }
      if (!distinct) break;
      found.push_back(u);
      bool in_box = true;
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto& b = box.bounds[static_cast<std::size_t>(k)];
        if (u[k] < b.lo || u[k] > b.hi) in_box = false;
      }
      if (in_box) accepted.push_back(u);
    }
  }
  return accepted;
}

StatePoint newton_correct(const ModelDef& model, const ParameterVector& theta, const StatePoint& guess,
                          const Eigen::VectorXd& direction, double tol, int max_iterations) {
  check_inputs(model, guess, theta);
  if (direction.size() != model.state_dim + 1 || !(direction.norm() > 0.0)) {
    throw UsageError("constraint direction must be a nonzero vector of length N+1");
  }
  const auto c = correct(model, theta, guess.z(), direction, tol, max_iterations);
  if (c.singular) throw SingularityError("bordered Jacobian is singular");
  if (!c.ok) throw CorrectorError("Newton corrector did not converge", c.residual);
  return StatePoint::from_z(c.z);
}

double distance_to_branch(const Eigen::VectorXd& z, const Branch& branch) {
  double best = INFINITY;
  const auto& s = branch.samples;
  if (s.size() == 1) return (s[0].z.z() - z).norm();
  for (std::size_t i = 1; i < s.size(); ++i) best = std::min(best, segment_distance(s[i - 1].z.z(), s[i].z.z(), z));
  return best;
}

Diagram trace_branches(const ModelDef& model, const ParameterVector& theta, const TraceSettings& settings) {
  return trace_branches(model, theta, model.p_window, settings);
}

Diagram trace_branches(const ModelDef& model, const ParameterVector& theta, Interval window,
                       const TraceSettings& settings) {
  if (theta.size() != model.param_dim || !theta.finite()) throw UsageError("theta must be finite with length M");
  if (!(window.hi > window.lo)) throw UsageError("p-window must satisfy p_min < p_max");
  if (!(settings.step > 0.0) || settings.max_samples < 2) throw UsageError("invalid trace settings");

  Diagram d;
  d.theta = theta;
  d.p_window = window;
  d.box = model.box(theta);
  d.settings = settings;
  Tracer tracer{model, theta, settings, d.box, window};

  std::vector<double> seeds_p;
  seeds_p.push_back(window.lo);
  for (int i = 1; i <= settings.interior_seeds; ++i) {
    seeds_p.push_back(window.lo + window.width() * i / (settings.interior_seeds + 1));
  }
  seeds_p.push_back(window.hi);

  const Eigen::Index n = model.state_dim;
  for (double p0 : seeds_p) {
    for (const auto& root : find_roots_deflated(model, theta, p0, settings)) {
      Eigen::VectorXd z0(n + 1);
      z0.head(n) = root;
      z0[n] = p0;
      bool duplicate = false;
      for (const auto& b : d.branches) {
        if (distance_to_branch(z0, b) < 0.5 * settings.step) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) continue;
      auto b = tracer.trace_from(z0);
      if (!b) continue;
      d.truncated = d.truncated || b->truncated;
      d.branches.push_back(std::move(*b));
    }
  }
  d.empty = d.branches.empty();
  return d;
}

}  // namespace bifinfer::continuation

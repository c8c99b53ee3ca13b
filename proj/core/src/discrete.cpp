#include "htexp/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace htexp {

namespace {

constexpr int kAlphabetCap = 4;
constexpr double kPmfSumTol = 1e-12;
constexpr double kIpfTol = 1e-12;
constexpr int kIpfMaxIters = 200000;

double xlog_ratio(double p, double q, const char* ctx) {
  if (p <= 0.0) return 0.0;
  if (q <= 0.0) {
    std::ostringstream os;
    os << ctx << ": mass " << p << " where the reference distribution has none";
    throw AbsoluteContinuityViolated(os.str());
  }
  return p * std::log(p / q);
}

void validate_pmf(const std::vector<double>& p, std::size_t want, double sum_tol,
                  const char* who) {
  if (p.size() != want) {
    std::ostringstream os;
    os << who << ": expected " << want << " entries, got " << p.size();
    throw InvalidInput(os.str());
  }
  double sum = 0.0;
  for (double v : p) {
    if (v < -1e-15) {
      std::ostringstream os;
      os << who << ": negative probability " << v;
      throw InvalidInput(os.str());
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > sum_tol) {
    std::ostringstream os;
    os << who << ": probabilities sum to " << sum << ", not 1";
    throw InvalidInput(os.str());
  }
}

// --- iterative proportional fitting -------------------------------------------

struct MarginalConstraint {
  std::vector<int> group;      // group id per table cell
  std::vector<double> target;  // pmf over groups
};

struct IpfResult {
  std::vector<double> table;
  int iterations = 0;
};

// Alternating I-projections onto "fixed marginal" families starting from
// `table` (the reference measure): converges to the I-projection of the
// reference onto the intersection whenever a feasible point dominated by the
// reference exists (Csiszar).
IpfResult ipf_fit(std::vector<double> table, const std::vector<MarginalConstraint>& cons,
                  double tol, int max_iters) {
  const std::size_t n = table.size();
  std::vector<std::vector<double>> sums(cons.size());
  for (std::size_t c = 0; c < cons.size(); ++c) sums[c].resize(cons[c].target.size());

  const auto compute_sums = [&](std::size_t c) {
    auto& s = sums[c];
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) s[cons[c].group[i]] += table[i];
  };

  for (int it = 1; it <= max_iters; ++it) {
    for (std::size_t c = 0; c < cons.size(); ++c) {
      compute_sums(c);
      const auto& tgt = cons[c].target;
      for (std::size_t i = 0; i < n; ++i) {
        const int g = cons[c].group[i];
        if (tgt[g] <= 0.0) {
          table[i] = 0.0;
        } else if (sums[c][g] > 0.0) {
          table[i] *= tgt[g] / sums[c][g];
        }
      }
      for (std::size_t g = 0; g < tgt.size(); ++g) {
        if (tgt[g] > 1e-14 && sums[c][g] <= 0.0) {
          throw DidNotConverge(
              "IPF: constraint group with positive target has no support in the reference");
        }
      }
    }
    double residual = 0.0;
    for (std::size_t c = 0; c < cons.size(); ++c) {
      compute_sums(c);
      double r = 0.0;
      for (std::size_t g = 0; g < cons[c].target.size(); ++g) {
        r += std::abs(sums[c][g] - cons[c].target[g]);
      }
      residual = std::max(residual, r);
    }
    if (residual <= tol) return {std::move(table), it};
  }
  throw DidNotConverge("IPF did not reach tolerance within the iteration cap");
}

double table_kl(const std::vector<double>& p, const std::vector<double>& q, const char* ctx) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += xlog_ratio(p[i], q[i], ctx);
  return acc;
}

// --- channel search -------------------------------------------------------------

// All nonnegative integer compositions of `total` into `parts` parts.
void compositions_rec(int total, int parts, std::vector<int>& cur,
                      std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int k = total; k >= 0; --k) {
    cur.push_back(k);
    compositions_rec(total - k, parts - 1, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> compositions(int total, int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  compositions_rec(total, parts, cur, out);
  return out;
}

// Maximizes I(S;V|U) over channels P_{S|X} subject to I(S;X|U) <= R, for one
// or more rates sharing a single grid pass. Both mutual informations are
// convex in the channel, so the maximum sits on an extreme point of the
// feasible set; the coarse grid locates the basin, coordinate-wise row ascent
// refines it, and a bisection along the segment toward high-information
// anchor channels lands the constraint exactly on its boundary (where the
// maximizer lives at partial rates).
class ChannelSearch {
 public:
  ChannelSearch(const DiscreteJointModel& model, int ns)
      : nx_(model.nx()),
        nu_(model.nu()),
        nv_(model.nv()),
        ns_(ns),
        p_xu_(model.marginal_xu()),
        p_uv_(model.marginal_uv()),
        p_u_(model.marginal_u()),
        p_(model.joint()),
        su_(ns_ * nu_),
        suv_(ns_ * nu_ * nv_) {}

  // c = I(S;X|U) always; o = I(S;V|U) only when c <= o_threshold (else -1),
  // so infeasible candidates can never report an objective.
  void evaluate(const std::vector<double>& rows, double& c, double& o,
                double o_threshold) const {
    std::fill(su_.begin(), su_.end(), 0.0);
    for (int s = 0; s < ns_; ++s) {
      for (int x = 0; x < nx_; ++x) {
        const double w = rows[x * ns_ + s];
        if (w <= 0.0) continue;
        for (int u = 0; u < nu_; ++u) su_[s * nu_ + u] += w * p_xu_[x * nu_ + u];
      }
    }
    c = 0.0;
    for (int s = 0; s < ns_; ++s) {
      for (int x = 0; x < nx_; ++x) {
        const double w = rows[x * ns_ + s];
        if (w <= 0.0) continue;
        for (int u = 0; u < nu_; ++u) {
          const double pxu = p_xu_[x * nu_ + u];
          if (pxu <= 0.0) continue;
          c += w * pxu * std::log(w * p_u_[u] / su_[s * nu_ + u]);
        }
      }
    }
    if (!(c <= o_threshold)) {
      o = -1.0;
      return;
    }
    std::fill(suv_.begin(), suv_.end(), 0.0);
    for (int s = 0; s < ns_; ++s) {
      for (int x = 0; x < nx_; ++x) {
        const double w = rows[x * ns_ + s];
        if (w <= 0.0) continue;
        const double* px = &p_[(x * nu_) * nv_];
        double* out = &suv_[(s * nu_) * nv_];
        for (int uv = 0; uv < nu_ * nv_; ++uv) out[uv] += w * px[uv];
      }
    }
    o = 0.0;
    for (int s = 0; s < ns_; ++s) {
      for (int u = 0; u < nu_; ++u) {
        const double su = su_[s * nu_ + u];
        if (su <= 0.0) continue;
        for (int v = 0; v < nv_; ++v) {
          const double puv = p_uv_[u * nv_ + v];
          const double psuv = suv_[(s * nu_ + u) * nv_ + v];
          if (psuv <= 0.0 || puv <= 0.0) continue;
          o += psuv * std::log(psuv * p_u_[u] / (su * puv));
        }
      }
    }
  }

  struct Best {
    double value = 0.0;
    std::vector<double> rows;
  };

  // One entry per requested rate (nats); rates must be positive and below the
  // full-rate threshold (callers handle R = 0 and R >= H(X|U) exactly).
  std::vector<Best> solve(const std::vector<double>& rates) const {
    const double rate_max = *std::max_element(rates.begin(), rates.end());

    // Anchor channels (used feasibly and as boundary-polish directions):
    // every deterministic map X -> S.
    std::vector<std::vector<double>> anchors;
    {
      std::vector<int> assign(nx_, 0);
      for (;;) {
        std::vector<double> rows(nx_ * ns_, 0.0);
        for (int x = 0; x < nx_; ++x) rows[x * ns_ + assign[x]] = 1.0;
        anchors.push_back(std::move(rows));
        int pos = 0;
        while (pos < nx_ && ++assign[pos] == ns_) assign[pos++] = 0;
        if (pos == nx_) break;
      }
    }

    // Coarse grid, resolution adapted to |X| (the full product grid is
    // enumerated; row 0 restricted to non-increasing compositions, an exact
    // reduction modulo relabelings of S).
    const int g = nx_ <= 2 ? 16 : (nx_ == 3 ? 4 : 2);
    const auto comps = compositions(g, ns_);
    std::vector<std::vector<int>> row0;
    for (const auto& cmp : comps) {
      if (std::is_sorted(cmp.rbegin(), cmp.rend())) row0.push_back(cmp);
    }

    struct Seed {
      double o = -1.0;
      std::vector<double> rows;
    };
    const std::size_t kSeeds = 4;
    std::vector<std::vector<Seed>> seeds(rates.size(), std::vector<Seed>(kSeeds));

    std::vector<double> rows(nx_ * ns_);
    std::vector<std::size_t> idx(nx_, 0);  // idx[0] indexes row0, others comps
    const double inv_g = 1.0 / g;
    for (;;) {
      for (int x = 0; x < nx_; ++x) {
        const auto& cmp = (x == 0) ? row0[idx[0]] : comps[idx[x]];
        for (int s = 0; s < ns_; ++s) rows[x * ns_ + s] = cmp[s] * inv_g;
      }
      double c, o;
      evaluate(rows, c, o, rate_max + 1e-10);
      if (o >= 0.0) {
        for (std::size_t r = 0; r < rates.size(); ++r) {
          if (c <= rates[r] + 1e-10 && o > seeds[r].back().o) {
            auto& sr = seeds[r];
            sr.back() = {o, rows};
            std::sort(sr.begin(), sr.end(),
                      [](const Seed& a, const Seed& b) { return a.o > b.o; });
          }
        }
      }
      int x = 0;
      for (; x < nx_; ++x) {
        const std::size_t lim = (x == 0) ? row0.size() : comps.size();
        if (++idx[x] < lim) break;
        idx[x] = 0;
      }
      if (x == nx_) break;
    }

    std::vector<Best> best(rates.size());
    for (std::size_t r = 0; r < rates.size(); ++r) {
      Best b;
      double prev_o = -2.0;
      for (const auto& seed : seeds[r]) {
        if (seed.o < 0.0) continue;
        if (std::abs(seed.o - prev_o) <= 1e-12) continue;  // relabeled duplicate
        prev_o = seed.o;
        Best cand = refine(rates[r], seed.rows, anchors);
        if (cand.value > b.value) b = std::move(cand);
      }
      if (b.rows.empty()) {
        // No feasible grid point (possible at very small R): start the polish
        // from the trivial constant channel, which is always feasible (c = 0).
        std::vector<double> constant(nx_ * ns_, 0.0);
        for (int x = 0; x < nx_; ++x) constant[x * ns_] = 1.0;
        b = refine(rates[r], constant, anchors);
      }
      best[r] = std::move(b);
    }
    return best;
  }

 private:
  Best refine(double rate, std::vector<double> rows,
              const std::vector<std::vector<double>>& anchors) const {
    const int g2 = nx_ <= 2 ? 32 : 16;
    const auto fine = compositions(g2, ns_);
    const double inv = 1.0 / g2;
    constexpr double kAlways = std::numeric_limits<double>::infinity();
    double c, o;
    evaluate(rows, c, o, kAlways);
    double best_o = (c <= rate + 1e-10) ? o : 0.0;

    for (int round = 0; round < 2; ++round) {
      // coordinate ascent across rows on a fine per-row grid
      for (int pass = 0; pass < 12; ++pass) {
        bool improved = false;
        for (int x = 0; x < nx_; ++x) {
          std::vector<double> save(rows.begin() + x * ns_, rows.begin() + (x + 1) * ns_);
          double row_best = best_o;
          std::vector<double> row_arg = save;
          for (const auto& cmp : fine) {
            for (int s = 0; s < ns_; ++s) rows[x * ns_ + s] = cmp[s] * inv;
            evaluate(rows, c, o, rate + 1e-10);
            if (o > row_best + 1e-13) {
              row_best = o;
              row_arg.assign(rows.begin() + x * ns_, rows.begin() + (x + 1) * ns_);
            }
          }
          std::copy(row_arg.begin(), row_arg.end(), rows.begin() + x * ns_);
          if (row_best > best_o + 1e-13) {
            best_o = row_best;
            improved = true;
          }
        }
        if (!improved) break;
      }
      // boundary polish: walk toward each anchor until I(S;X|U) hits R.
      // Both informations are convex along the segment, so the feasible part
      // is an interval from t = 0 and the candidate maximum over it sits at
      // an endpoint.
      bool polished = false;
      for (const auto& anchor : anchors) {
        double ca, oa;
        evaluate(anchor, ca, oa, kAlways);
        std::vector<double> cand;
        double cand_o;
        if (ca <= rate + 1e-10) {
          cand = anchor;
          cand_o = oa;
        } else {
          double lo = 0.0, hi = 1.0;
          std::vector<double> mix(rows.size());
          for (int it = 0; it < 60; ++it) {
            const double t = 0.5 * (lo + hi);
            for (std::size_t i = 0; i < rows.size(); ++i) {
              mix[i] = (1.0 - t) * rows[i] + t * anchor[i];
            }
            double cm, om;
            evaluate(mix, cm, om, -kAlways);
            (cm <= rate ? lo : hi) = t;
          }
          for (std::size_t i = 0; i < rows.size(); ++i) {
            mix[i] = (1.0 - lo) * rows[i] + lo * anchor[i];
          }
          double cm;
          evaluate(mix, cm, cand_o, kAlways);
          cand = std::move(mix);
        }
        if (cand_o > best_o + 1e-13) {
          best_o = cand_o;
          rows = std::move(cand);
          polished = true;
        }
      }
      if (!polished && round > 0) break;
    }
    return {best_o, std::move(rows)};
  }

  int nx_, nu_, nv_, ns_;
  std::vector<double> p_xu_, p_uv_, p_u_, p_;
  mutable std::vector<double> su_, suv_;
};

double conditional_entropy_x_given_u(const DiscreteJointModel& model) {
  const auto p_xu = model.marginal_xu();
  const auto p_u = model.marginal_u();
  double h = 0.0;
  for (int x = 0; x < model.nx(); ++x) {
    for (int u = 0; u < model.nu(); ++u) {
      const double p = p_xu[x * model.nu() + u];
      if (p > 0.0) h -= p * std::log(p / p_u[u]);
    }
  }
  return h;
}

Nats divergence_v_given_u(const DiscreteJointModel& model) {
  const auto p_uv = model.marginal_uv();
  const auto p_u = model.marginal_u();
  const auto pbar_uv = model.marginal_uv_bar();
  const auto pbar_u = [&] {
    std::vector<double> r(model.nu(), 0.0);
    for (int u = 0; u < model.nu(); ++u)
      for (int v = 0; v < model.nv(); ++v) r[u] += pbar_uv[u * model.nv() + v];
    return r;
  }();
  double acc = 0.0;
  for (int u = 0; u < model.nu(); ++u) {
    for (int v = 0; v < model.nv(); ++v) {
      const double puv = p_uv[u * model.nv() + v];
      if (puv <= 0.0) continue;
      const double cond_p = puv / p_u[u];
      const double cond_q = pbar_uv[u * model.nv() + v] / pbar_u[u];
      acc += puv * std::log(cond_p / cond_q);
    }
  }
  return kl_nats(acc);
}

// I(X;V|U) under the null, the exact full-rate channel value.
Nats information_x_v_given_u(const DiscreteJointModel& model) {
  const int nx = model.nx(), nu = model.nu(), nv = model.nv();
  std::vector<double> xvu(nx * nv * nu, 0.0);
  for (int x = 0; x < nx; ++x)
    for (int u = 0; u < nu; ++u)
      for (int v = 0; v < nv; ++v) xvu[(x * nv + v) * nu + u] = model.p(x, u, v);
  return conditional_mutual_information(xvu, nx, nv, nu);
}

}  // namespace

DiscreteJointModel DiscreteJointModel::create(int nx, int nu, int nv, std::vector<double> P,
                                              std::vector<double> PbarU,
                                              std::vector<double> PbarXgivenU,
                                              std::vector<double> PbarVgivenU) {
  if (nx < 1 || nu < 1 || nv < 1) {
    throw InvalidInput("alphabet sizes must be >= 1");
  }
  if (nx > kAlphabetCap || nu > kAlphabetCap || nv > kAlphabetCap) {
    std::ostringstream os;
    os << "alphabet sizes (" << nx << ", " << nu << ", " << nv << ") exceed the enumeration cap "
       << kAlphabetCap;
    throw InstanceTooLarge(os.str());
  }
  validate_pmf(P, static_cast<std::size_t>(nx) * nu * nv, kPmfSumTol, "P");
  validate_pmf(PbarU, nu, kPmfSumTol, "Pbar_factors.PU");
  if (PbarXgivenU.size() != static_cast<std::size_t>(nu) * nx) {
    throw InvalidInput("Pbar_factors.PX_given_U has the wrong number of entries");
  }
  if (PbarVgivenU.size() != static_cast<std::size_t>(nu) * nv) {
    throw InvalidInput("Pbar_factors.PV_given_U has the wrong number of entries");
  }
  for (int u = 0; u < nu; ++u) {
    validate_pmf({PbarXgivenU.begin() + u * nx, PbarXgivenU.begin() + (u + 1) * nx}, nx,
                 kPmfSumTol, "Pbar_factors.PX_given_U row");
    validate_pmf({PbarVgivenU.begin() + u * nv, PbarVgivenU.begin() + (u + 1) * nv}, nv,
                 kPmfSumTol, "Pbar_factors.PV_given_U row");
  }

  DiscreteJointModel m;
  m.nx_ = nx;
  m.nu_ = nu;
  m.nv_ = nv;
  m.P_ = std::move(P);
  for (double& v : m.P_) v = std::max(v, 0.0);
  m.Pbar_.resize(m.P_.size());
  for (int x = 0; x < nx; ++x) {
    for (int u = 0; u < nu; ++u) {
      for (int v = 0; v < nv; ++v) {
        m.Pbar_[(x * nu + u) * nv + v] =
            PbarU[u] * PbarXgivenU[u * nx + x] * PbarVgivenU[u * nv + v];
      }
    }
  }
  for (std::size_t i = 0; i < m.P_.size(); ++i) {
    if (m.P_[i] > 0.0 && m.Pbar_[i] <= 0.0) {
      throw AbsoluteContinuityViolated(
          "P places mass on a cell where the factored alternative has none");
    }
  }
  return m;
}

std::vector<double> DiscreteJointModel::marginal_xu() const {
  std::vector<double> r(nx_ * nu_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int u = 0; u < nu_; ++u)
      for (int v = 0; v < nv_; ++v) r[x * nu_ + u] += p(x, u, v);
  return r;
}

std::vector<double> DiscreteJointModel::marginal_xu_bar() const {
  std::vector<double> r(nx_ * nu_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int u = 0; u < nu_; ++u)
      for (int v = 0; v < nv_; ++v) r[x * nu_ + u] += pbar(x, u, v);
  return r;
}

std::vector<double> DiscreteJointModel::marginal_uv() const {
  std::vector<double> r(nu_ * nv_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int u = 0; u < nu_; ++u)
      for (int v = 0; v < nv_; ++v) r[u * nv_ + v] += p(x, u, v);
  return r;
}

std::vector<double> DiscreteJointModel::marginal_uv_bar() const {
  std::vector<double> r(nu_ * nv_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int u = 0; u < nu_; ++u)
      for (int v = 0; v < nv_; ++v) r[u * nv_ + v] += pbar(x, u, v);
  return r;
}

std::vector<double> DiscreteJointModel::marginal_x() const {
  std::vector<double> r(nx_, 0.0);
  const auto xu = marginal_xu();
  for (int x = 0; x < nx_; ++x)
    for (int u = 0; u < nu_; ++u) r[x] += xu[x * nu_ + u];
  return r;
}

std::vector<double> DiscreteJointModel::marginal_u() const {
  std::vector<double> r(nu_, 0.0);
  const auto xu = marginal_xu();
  for (int x = 0; x < nx_; ++x)
    for (int u = 0; u < nu_; ++u) r[u] += xu[x * nu_ + u];
  return r;
}

TestChannel TestChannel::identity(int nx, int ns) {
  if (ns < nx) throw InvalidInput("identity channel requires |S| >= |X|");
  TestChannel ch;
  ch.ns = ns;
  ch.rows.assign(static_cast<std::size_t>(nx) * ns, 0.0);
  for (int x = 0; x < nx; ++x) ch.rows[x * ns + x] = 1.0;
  return ch;
}

Nats discrete_kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw ShapeMismatch("discrete_kl: pmfs live on different alphabets");
  }
  validate_pmf(p, p.size(), 1e-9, "discrete_kl p");
  validate_pmf(q, q.size(), 1e-9, "discrete_kl q");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += xlog_ratio(p[i], q[i], "discrete_kl");
  return kl_nats(acc);
}

Nats conditional_mutual_information(const std::vector<double>& joint, int na, int nb, int nc) {
  if (na < 1 || nb < 1 || nc < 1) {
    throw InvalidInput("conditional_mutual_information: alphabet sizes must be >= 1");
  }
  validate_pmf(joint, static_cast<std::size_t>(na) * nb * nc, 1e-9,
               "conditional_mutual_information joint");
  std::vector<double> ac(na * nc, 0.0), bc(nb * nc, 0.0), c(nc, 0.0);
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < nb; ++b) {
      for (int k = 0; k < nc; ++k) {
        const double p = joint[(a * nb + b) * nc + k];
        ac[a * nc + k] += p;
        bc[b * nc + k] += p;
        c[k] += p;
      }
    }
  }
  double acc = 0.0;
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < nb; ++b) {
      for (int k = 0; k < nc; ++k) {
        const double p = joint[(a * nb + b) * nc + k];
        if (p <= 0.0) continue;
        acc += p * std::log(p * c[k] / (ac[a * nc + k] * bc[b * nc + k]));
      }
    }
  }
  return kl_nats(acc);
}

MarginalMinReport check_marginal_min_condition(const DiscreteJointModel& model) {
  const int nx = model.nx(), nu = model.nu();
  MarginalConstraint rows, cols;
  rows.group.resize(nx * nu);
  cols.group.resize(nx * nu);
  for (int x = 0; x < nx; ++x) {
    for (int u = 0; u < nu; ++u) {
      rows.group[x * nu + u] = x;
      cols.group[x * nu + u] = u;
    }
  }
  rows.target = model.marginal_x();
  cols.target = model.marginal_u();
  const auto q = model.marginal_xu_bar();
  IpfResult fit = ipf_fit(q, {rows, cols}, kIpfTol, kIpfMaxIters);

  MarginalMinReport rep;
  rep.minimizer_xu = fit.table;
  rep.iterations = fit.iterations;
  rep.kl_at_min = table_kl(fit.table, q, "check_marginal_min_condition");
  const auto p_xu = model.marginal_xu();
  double l1 = 0.0;
  for (std::size_t i = 0; i < p_xu.size(); ++i) l1 += std::abs(fit.table[i] - p_xu[i]);
  rep.tv_to_pxu = 0.5 * l1;
  rep.holds = rep.tv_to_pxu <= 1e-6;
  return rep;
}

std::vector<Lemma1Result> lemma1_single_letter_batch(const DiscreteJointModel& model,
                                                     const std::vector<double>& rates_nats) {
  const int ns = model.nx() + 2;
  Lemma1Result base;
  base.divergence_xu = discrete_kl(model.marginal_xu(), model.marginal_xu_bar());
  base.divergence_v_given_u = divergence_v_given_u(model);
  base.hypothesis_verified = check_marginal_min_condition(model).holds;

  const double h_xgu = conditional_entropy_x_given_u(model);
  const Nats full_rate_term = information_x_v_given_u(model);

  std::vector<Lemma1Result> out(rates_nats.size(), base);
  std::vector<double> partial_rates;
  std::vector<std::size_t> partial_pos;
  for (std::size_t i = 0; i < rates_nats.size(); ++i) {
    const double R = rates_nats[i];
    if (R < 0.0) throw InvalidInput("lemma1_single_letter: rate must be nonnegative");
    if (R >= h_xgu - 1e-12) {
      // Full rate: S = X is feasible and optimal by data processing.
      out[i].channel_term = full_rate_term;
      out[i].best_channel = TestChannel::identity(model.nx(), ns);
    } else if (R == 0.0) {
      // Zero rate: I(S;X|U) = 0 with S -- X -- (U,V) forces I(S;V|U) = 0.
      out[i].channel_term = Nats{0.0};
      TestChannel constant;
      constant.ns = ns;
      constant.rows.assign(static_cast<std::size_t>(model.nx()) * ns, 0.0);
      for (int x = 0; x < model.nx(); ++x) constant.rows[x * ns] = 1.0;
      out[i].best_channel = constant;
    } else {
      partial_rates.push_back(R);
      partial_pos.push_back(i);
    }
  }

  if (!partial_rates.empty()) {
    ChannelSearch search(model, ns);
    const auto best = search.solve(partial_rates);
    for (std::size_t k = 0; k < partial_pos.size(); ++k) {
      out[partial_pos[k]].channel_term = kl_nats(best[k].value);
      out[partial_pos[k]].best_channel = TestChannel{ns, best[k].rows};
    }
  }

  for (auto& r : out) {
    r.value = Nats{r.divergence_xu.value + r.divergence_v_given_u.value + r.channel_term.value};
  }
  return out;
}

Lemma1Result lemma1_single_letter(const DiscreteJointModel& model, double rate_nats) {
  return lemma1_single_letter_batch(model, {rate_nats}).front();
}

Nats multiletter_exponent(const DiscreteJointModel& model, double rate_nats, int n) {
  if (n != 1 && n != 2) throw InvalidInput("multiletter_exponent: n must be 1 or 2");
  if (rate_nats < 0.0) throw InvalidInput("multiletter_exponent: rate must be nonnegative");
  const int nx = model.nx(), nu = model.nu(), nv = model.nv();
  const int nseq = n == 1 ? nx : nx * nx;
  if (nseq > 8) {
    std::ostringstream os;
    os << "multiletter enumeration cap exceeded: |X|^n = " << nseq << " > 8";
    throw InstanceTooLarge(os.str());
  }
  const double rate_bits = rate_nats / std::numbers::ln2;
  // floor with a tiny guard against 1-ulp noise from the bits<->nats round trip
  const double w_raw = std::floor(std::pow(2.0, n * rate_bits) + 1e-12);
  // more messages than sequences never helps, so clamp before the cap check
  const int W = w_raw >= nseq ? nseq : std::max(1, static_cast<int>(w_raw));
  if (W > 4) {
    std::ostringstream os;
    os << "multiletter enumeration cap exceeded: W = " << W << " > 4";
    throw InstanceTooLarge(os.str());
  }

  const int nus = n == 1 ? nu : nu * nu;
  const int nvs = n == 1 ? nv : nv * nv;
  std::vector<double> Pn(nseq * nus * nvs), Qn(nseq * nus * nvs);
  if (n == 1) {
    Pn = model.joint();
    Qn = model.joint_bar();
  } else {
    for (int x1 = 0; x1 < nx; ++x1)
      for (int x2 = 0; x2 < nx; ++x2)
        for (int u1 = 0; u1 < nu; ++u1)
          for (int u2 = 0; u2 < nu; ++u2)
            for (int v1 = 0; v1 < nv; ++v1)
              for (int v2 = 0; v2 < nv; ++v2) {
                const int xs = x1 * nx + x2, us = u1 * nu + u2, vs = v1 * nv + v2;
                Pn[(xs * nus + us) * nvs + vs] = model.p(x1, u1, v1) * model.p(x2, u2, v2);
                Qn[(xs * nus + us) * nvs + vs] =
                    model.pbar(x1, u1, v1) * model.pbar(x2, u2, v2);
              }
  }

  // Enumerate set partitions of the |X|^n sequences into <= W blocks as
  // restricted growth strings, in lexicographic order; strict improvement
  // keeps the earliest partition on ties.
  double best = -1.0;
  std::vector<int> labels(nseq, 0);
  std::vector<double> pm(W * nus * nvs), qm(W * nus * nvs);
  const auto score = [&]() {
    std::fill(pm.begin(), pm.end(), 0.0);
    std::fill(qm.begin(), qm.end(), 0.0);
    for (int xs = 0; xs < nseq; ++xs) {
      const int l = labels[xs];
      for (int uv = 0; uv < nus * nvs; ++uv) {
        pm[l * nus * nvs + uv] += Pn[xs * nus * nvs + uv];
        qm[l * nus * nvs + uv] += Qn[xs * nus * nvs + uv];
      }
    }
    double d = 0.0;
    for (int i = 0; i < W * nus * nvs; ++i) {
      d += xlog_ratio(pm[i], qm[i], "multiletter_exponent");
    }
    return d;
  };
  const auto recurse = [&](auto&& self, int pos, int maxlab) -> void {
    if (pos == nseq) {
      const double d = score();
      if (d > best) best = d;
      return;
    }
    const int top = std::min(maxlab + 1, W - 1);
    for (int l = 0; l <= top; ++l) {
      labels[pos] = l;
      self(self, pos + 1, std::max(maxlab, l));
    }
  };
  recurse(recurse, 1, 0);  // labels[0] = 0 canonically
  return kl_nats(best / n);
}

Nats sha_weakened_bound(const DiscreteJointModel& model, const TestChannel& channel,
                        double rate_nats) {
  const int nx = model.nx(), nu = model.nu(), nv = model.nv();
  const int ns = channel.ns;
  if (ns < 1 || channel.rows.size() != static_cast<std::size_t>(nx) * ns) {
    throw ShapeMismatch("sha_weakened_bound: channel shape does not match |X|");
  }
  std::vector<double> W = channel.rows;
  for (int x = 0; x < nx; ++x) {
    double sum = 0.0;
    for (int s = 0; s < ns; ++s) {
      if (W[x * ns + s] < -1e-12) {
        throw InvalidInput("sha_weakened_bound: channel has a negative probability");
      }
      W[x * ns + s] = std::max(W[x * ns + s], 0.0);
      sum += W[x * ns + s];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidInput("sha_weakened_bound: channel row does not sum to 1");
    }
    for (int s = 0; s < ns; ++s) W[x * ns + s] /= sum;
  }

  const std::size_t cells = static_cast<std::size_t>(ns) * nx * nu * nv;
  const auto at = [&](int s, int x, int u, int v) -> std::size_t {
    return ((static_cast<std::size_t>(s) * nx + x) * nu + u) * nv + v;
  };
  std::vector<double> P(cells, 0.0), Q(cells, 0.0);
  for (int s = 0; s < ns; ++s)
    for (int x = 0; x < nx; ++x) {
      const double w = W[x * ns + s];
      for (int u = 0; u < nu; ++u)
        for (int v = 0; v < nv; ++v) {
          P[at(s, x, u, v)] = w * model.p(x, u, v);
          Q[at(s, x, u, v)] = w * model.pbar(x, u, v);
        }
    }

  // Rate feasibility: I(S;X|U) <= R.
  std::vector<double> p_sxu(ns * nx * nu, 0.0);
  for (int s = 0; s < ns; ++s)
    for (int x = 0; x < nx; ++x)
      for (int u = 0; u < nu; ++u)
        for (int v = 0; v < nv; ++v) p_sxu[(s * nx + x) * nu + u] += P[at(s, x, u, v)];
  const double i_sx_u = conditional_mutual_information(p_sxu, ns, nx, nu).value;
  if (i_sx_u > rate_nats + 1e-9) {
    std::ostringstream os;
    os << "sha_weakened_bound: I(S;X|U) = " << i_sx_u << " exceeds R = " << rate_nats;
    throw RateConstraintViolated(os.str());
  }
  // I(S;X|UV), with (U,V) lumped as one conditioning variable (same layout).
  const double i_sx_uv = conditional_mutual_information(P, ns, nx, nu * nv).value;

  // Marginal targets under P.
  MarginalConstraint c_sx, c_suv, c_uv;
  c_sx.group.resize(cells);
  c_suv.group.resize(cells);
  c_uv.group.resize(cells);
  c_sx.target.assign(ns * nx, 0.0);
  c_suv.target.assign(ns * nu * nv, 0.0);
  c_uv.target.assign(nu * nv, 0.0);
  for (int s = 0; s < ns; ++s)
    for (int x = 0; x < nx; ++x)
      for (int u = 0; u < nu; ++u)
        for (int v = 0; v < nv; ++v) {
          const std::size_t i = at(s, x, u, v);
          c_sx.group[i] = s * nx + x;
          c_suv.group[i] = (s * nu + u) * nv + v;
          c_uv.group[i] = u * nv + v;
          c_sx.target[s * nx + x] += P[i];
          c_suv.target[(s * nu + u) * nv + v] += P[i];
          c_uv.target[u * nv + v] += P[i];
        }

  const IpfResult fit1 = ipf_fit(Q, {c_sx, c_suv}, kIpfTol, kIpfMaxIters);
  const double term1 = table_kl(fit1.table, Q, "sha_weakened_bound term1");
  const IpfResult fit2 = ipf_fit(Q, {c_sx, c_uv}, kIpfTol, kIpfMaxIters);
  const double term2 = table_kl(fit2.table, Q, "sha_weakened_bound term2") + rate_nats - i_sx_uv;

  return kl_nats(std::min(term1, term2));
}

}  // namespace htexp

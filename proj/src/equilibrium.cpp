#include "ftr/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <unordered_set>

#include "ftr/errors.hpp"

namespace ftr {

namespace {

double band_midpoint(const BidBand& b) { return 0.5 * (b.lo + b.hi); }

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

std::vector<double> bid_grid(const BidBand& band, int points) {
  std::vector<double> g;
  if (points <= 1 || band.hi - band.lo < 1e-12) {
    g.push_back(band.lo);
    return g;
  }
  for (int k = 0; k < points; ++k)
    g.push_back(band.lo + (band.hi - band.lo) * k / (points - 1));
  return g;
}

std::vector<int> active_slots(const BidProfile& prof) {
  std::vector<int> ids;
  for (size_t i = 0; i < prof.active.size(); ++i)
    if (prof.active[i]) ids.push_back(static_cast<int>(i));
  return ids;
}

double effective_impact(const GameOffer& offer, double m) {
  return offer.type == FtrType::option ? std::max(0.0, m) : m;
}

}  // namespace

int KktSystem::slot(int player, int path, FtrType type) const {
  for (size_t i = 0; i < offers.size(); ++i)
    if (offers[i].player == player && offers[i].path == path && offers[i].type == type)
      return static_cast<int>(i);
  return -1;
}

KktSystem reduce_bilevel(const std::vector<PathMarketData>& path_data,
                         const std::vector<std::vector<ContributionMetrics>>& contrib,
                         const Eigen::MatrixXd& path_impact, const Eigen::VectorXd& line_cap,
                         const std::vector<int>& line_ids, double rho_obl_base) {
  KktSystem sys;
  sys.paths = path_data;
  sys.n_players = static_cast<int>(contrib.size());
  sys.line_cap = line_cap;
  sys.line_ids = line_ids;

  std::vector<Eigen::VectorXd> impact_rows;
  for (int pl = 0; pl < sys.n_players; ++pl) {
    if (contrib[pl].size() != path_data.size())
      throw SolverError("contribution metrics do not align with paths");
    for (size_t pa = 0; pa < path_data.size(); ++pa) {
      const PathMarketData& pd = path_data[pa];
      const ContributionMetrics& cm = contrib[pl][pa];
      if (cm.ftr_min > cm.ftr_max + 1e-9)
        throw InconsistentBoundsError("ftr_min above ftr_max for a (player, path) pair");
      const double q_max = cm.ftr_max;
      // The auction floor is zero: the interval's lower end describes the
      // player's own hedging analysis, not a quantity the ISO must sell.
      const double q_min = 0.0;
      if (q_max < 1e-9) continue;  // nothing purchasable on this pair

      const double gap = cm.fcp - std::abs(cm.rcp);
      auto add_offer = [&](FtrType type, const BidBand& band, double value) {
        if (!band.valid()) return;
        GameOffer o;
        o.player = pl;
        o.path = static_cast<int>(pa);
        o.type = type;
        o.band = band;
        o.q_min = q_min;
        o.q_max = q_max;
        o.ftr_min_raw = cm.ftr_min;
        o.share = cm.share;
        o.plus_offset = std::max(0.0, gap);
        o.minus_offset = std::min(0.0, gap);
        o.value_coeff = value;
        sys.offers.push_back(o);
        impact_rows.push_back(path_impact.row(pa));
      };

      // Obligations only where the forward chance strictly dominates; the
      // band itself also collapses unless the capped value clears the floor.
      if (pd.zeta_f > pd.zeta_r) {
        BidBand obl{rho_obl_base, (2.0 * pd.zeta_f - 1.0) * pd.spread};
        add_offer(FtrType::obligation, obl, (2.0 * pd.zeta_f - 1.0) * pd.spread);
      }
      BidBand opt{std::max(0.0, (2.0 * pd.zeta_f - 1.0) * pd.spread), pd.zeta_f * pd.spread};
      if (opt.hi > 0.0 || (opt.hi == 0.0 && opt.lo == 0.0))
        add_offer(FtrType::option, opt, pd.zeta_f * pd.spread);
    }
  }

  sys.offer_impact.resize(static_cast<int>(sys.offers.size()), line_cap.size());
  for (size_t i = 0; i < impact_rows.size(); ++i) sys.offer_impact.row(i) = impact_rows[i];
  return sys;
}

BidProfile uniform_type_profile(const KktSystem& sys, FtrType type) {
  BidProfile prof;
  prof.active.assign(sys.offers.size(), 0);
  prof.bid = Eigen::VectorXd::Zero(sys.offers.size());
  prof.q_cap = Eigen::VectorXd::Zero(sys.offers.size());
  for (size_t i = 0; i < sys.offers.size(); ++i) {
    const GameOffer& o = sys.offers[i];
    prof.bid[i] = band_midpoint(o.band);
    prof.q_cap[i] = o.q_max;
    if (o.type == type) prof.active[i] = 1;
  }
  return prof;
}

ClearingInstance to_clearing_instance(const KktSystem& sys, const BidProfile& profile) {
  ClearingInstance inst;
  inst.line_cap = sys.line_cap;
  inst.line_ids = sys.line_ids;
  const std::vector<int> ids = active_slots(profile);
  inst.impact.resize(static_cast<int>(ids.size()), sys.line_cap.size());
  for (size_t k = 0; k < ids.size(); ++k) {
    const GameOffer& o = sys.offers[ids[k]];
    Offer offer;
    offer.player = o.player;
    offer.path = o.path;
    offer.type = o.type;
    offer.price = profile.bid[ids[k]];
    offer.q_min = o.q_min;
    offer.q_max = std::max(o.q_min, std::min(profile.q_cap[ids[k]], o.q_max));
    inst.offers.push_back(offer);
    inst.impact.row(k) = sys.offer_impact.row(ids[k]);
  }
  return inst;
}

KktPoint extract_point(const KktSystem& sys, const BidProfile& profile,
                       const ClearingOutcome& outcome) {
  const int n = static_cast<int>(sys.offers.size());
  KktPoint pt;
  pt.award = Eigen::VectorXd::Zero(n);
  pt.slack_upper = Eigen::VectorXd::Zero(n);
  pt.mu_plus = Eigen::VectorXd::Zero(n);
  pt.mu_minus = Eigen::VectorXd::Zero(n);
  pt.mu_line_up = outcome.mu_line_up;
  pt.mu_line_lo = outcome.mu_line_lo;
  pt.line_flow = Eigen::VectorXd::Zero(sys.line_cap.size());

  const std::vector<int> ids = active_slots(profile);
  for (size_t k = 0; k < ids.size(); ++k) {
    const int i = ids[k];
    pt.award[i] = outcome.award[k];
    pt.slack_upper[i] = profile.q_cap[i] - outcome.award[k];
    pt.mu_plus[i] = outcome.mu_plus[k];
    pt.mu_minus[i] = outcome.mu_minus[k];
    for (int l = 0; l < sys.line_cap.size(); ++l)
      pt.line_flow[l] += effective_impact(sys.offers[i], sys.offer_impact(i, l)) * pt.award[i];
  }
  return pt;
}

double KktResiduals::worst() const {
  return std::max({stationarity, complementarity, band, bounds, flow});
}

KktResiduals compute_residuals(const KktSystem& sys, const BidProfile& profile,
                               const KktPoint& point) {
  KktResiduals r;
  const Eigen::VectorXd mu_net = point.mu_line_up - point.mu_line_lo;
  for (size_t i = 0; i < sys.offers.size(); ++i) {
    if (!profile.active[i]) continue;
    const GameOffer& o = sys.offers[i];
    double m_mu = 0.0;
    for (int l = 0; l < sys.line_cap.size(); ++l)
      m_mu += effective_impact(o, sys.offer_impact(i, l)) * mu_net[l];
    const double stat = profile.bid[i] - m_mu - point.mu_plus[i] + point.mu_minus[i];
    r.stationarity = std::max(r.stationarity, std::abs(stat));

    r.complementarity =
        std::max(r.complementarity, std::abs(point.slack_upper[i] * point.mu_plus[i]));
    r.complementarity = std::max(
        r.complementarity, std::abs((point.award[i] - o.q_min) * point.mu_minus[i]));

    r.band = std::max(r.band, std::max(o.band.lo - profile.bid[i], 0.0));
    r.band = std::max(r.band, std::max(profile.bid[i] - o.band.hi, 0.0));
    r.bounds = std::max(r.bounds, std::max(o.q_min - point.award[i], 0.0));
    r.bounds = std::max(r.bounds, std::max(point.award[i] - profile.q_cap[i], 0.0));
  }
  for (int l = 0; l < sys.line_cap.size(); ++l) {
    const double up_slack = sys.line_cap[l] - point.line_flow[l];
    const double lo_slack = point.line_flow[l] + sys.line_cap[l];
    r.flow = std::max(r.flow, std::max(-up_slack, -lo_slack));
    r.complementarity = std::max(r.complementarity, std::abs(up_slack * point.mu_line_up[l]));
    r.complementarity = std::max(r.complementarity, std::abs(lo_slack * point.mu_line_lo[l]));
  }
  r.flow = std::max(r.flow, 0.0);
  return r;
}

double offer_profit_term(const GameOffer& offer, double award, double bid) {
  return offer.value_coeff * (award - offer.plus_offset) -
         bid * (award - offer.minus_offset);
}

Eigen::VectorXd player_profits(const KktSystem& sys, const BidProfile& profile,
                               const Eigen::VectorXd& award) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(sys.n_players);
  for (size_t i = 0; i < sys.offers.size(); ++i)
    if (profile.active[i])
      p[sys.offers[i].player] += offer_profit_term(sys.offers[i], award[i], profile.bid[i]);
  return p;
}

double joint_objective_value(const KktSystem& sys, const BidProfile& profile,
                             const Eigen::VectorXd& award) {
  return player_profits(sys, profile, award).sum();
}

EquilibriumSolution evaluate_profile(const KktSystem& sys, const BidProfile& profile) {
  EquilibriumSolution sol;
  sol.profile = profile;
  ClearingOutcome outcome = clear_market(to_clearing_instance(sys, profile));
  sol.point = extract_point(sys, profile, outcome);
  sol.residuals = compute_residuals(sys, profile, sol.point);
  sol.player_profit = player_profits(sys, profile, sol.point.award);
  sol.joint_objective = sol.player_profit.sum();
  return sol;
}

// ---------------------------------------------------------------------------
// Interior-point clearing at a fixed barrier parameter. The central-path
// point satisfies every complementarity product exactly at tau, which is the
// relaxed system the tau-schedule walks down.

namespace {

struct BarrierWork {
  std::vector<int> free_ids;   // active slots with room to move
  std::vector<int> fixed_ids;  // active pinched slots (q_min == q_cap)
  Eigen::VectorXd qmin, qcap, rho;  // per free slot
  Eigen::MatrixXd eff;              // free slots x lines, option-rectified
  Eigen::VectorXd fixed_flow;       // per line
  Eigen::VectorXd cap;
};

BarrierWork build_barrier_work(const KktSystem& sys, const BidProfile& prof) {
  BarrierWork w;
  w.cap = sys.line_cap;
  w.fixed_flow = Eigen::VectorXd::Zero(sys.line_cap.size());
  for (int i : active_slots(prof)) {
    const GameOffer& o = sys.offers[i];
    const double hi = std::max(o.q_min, std::min(prof.q_cap[i], o.q_max));
    if (hi - o.q_min < 1e-10) {
      w.fixed_ids.push_back(i);
      for (int l = 0; l < sys.line_cap.size(); ++l)
        w.fixed_flow[l] += effective_impact(o, sys.offer_impact(i, l)) * o.q_min;
    } else {
      w.free_ids.push_back(i);
    }
  }
  const int nf = static_cast<int>(w.free_ids.size());
  w.qmin.resize(nf);
  w.qcap.resize(nf);
  w.rho.resize(nf);
  w.eff.resize(nf, sys.line_cap.size());
  for (int k = 0; k < nf; ++k) {
    const GameOffer& o = sys.offers[w.free_ids[k]];
    w.qmin[k] = o.q_min;
    w.qcap[k] = std::max(o.q_min, std::min(prof.q_cap[w.free_ids[k]], o.q_max));
    w.rho[k] = prof.bid[w.free_ids[k]];
    for (int l = 0; l < sys.line_cap.size(); ++l)
      w.eff(k, l) = effective_impact(o, sys.offer_impact(w.free_ids[k], l));
  }
  return w;
}

// Strictly interior start near the warm point; backs off toward qmin until
// the line margins open up.
Eigen::VectorXd interior_start(const BarrierWork& w, const Eigen::VectorXd& warm) {
  const int nf = static_cast<int>(w.free_ids.size());
  Eigen::VectorXd q(nf);
  for (int k = 0; k < nf; ++k) {
    const double pad = 1e-4 * (w.qcap[k] - w.qmin[k]);
    q[k] = clamp(warm[k], w.qmin[k] + pad, w.qcap[k] - pad);
  }
  for (double t = 1.0; t > 1e-10; t *= 0.5) {
    Eigen::VectorXd cand = w.qmin + t * (q - w.qmin);
    Eigen::VectorXd f = w.eff.transpose() * cand + w.fixed_flow;
    bool ok = true;
    for (int l = 0; l < w.cap.size(); ++l)
      if (f[l] > w.cap[l] - 1e-9 || f[l] < -w.cap[l] + 1e-9) ok = false;
    if (ok) return cand;
  }
  throw InfeasibleInstanceError("minimum awards leave no interior for the line limits");
}

double barrier_value(const BarrierWork& w, double tau, const Eigen::VectorXd& q) {
  double phi = -w.rho.dot(q);
  for (int k = 0; k < q.size(); ++k)
    phi -= tau * (std::log(q[k] - w.qmin[k]) + std::log(w.qcap[k] - q[k]));
  Eigen::VectorXd f = w.eff.transpose() * q + w.fixed_flow;
  for (int l = 0; l < w.cap.size(); ++l)
    phi -= tau * (std::log(w.cap[l] - f[l]) + std::log(f[l] + w.cap[l]));
  return phi;
}

// Newton minimization of the barrier; returns the central-path awards.
Eigen::VectorXd barrier_clear(const BarrierWork& w, double tau, const Eigen::VectorXd& warm) {
  const int nf = static_cast<int>(w.free_ids.size());
  if (nf == 0) return Eigen::VectorXd();
  Eigen::VectorXd q = interior_start(w, warm);
  // Margins near a bound cancel to ~1e-8 in doubles, so the gradient cannot
  // be driven much below that; the exact LP polish owns the final precision.
  const double gtol = 1e-7 * std::max(1.0, w.rho.cwiseAbs().maxCoeff());

  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd a = q - w.qmin;
    Eigen::VectorXd b = w.qcap - q;
    Eigen::VectorXd f = w.eff.transpose() * q + w.fixed_flow;
    Eigen::VectorXd u = w.cap - f;
    Eigen::VectorXd v = f + w.cap;

    Eigen::VectorXd g = -w.rho;
    for (int k = 0; k < nf; ++k) g[k] += tau * (-1.0 / a[k] + 1.0 / b[k]);
    Eigen::VectorXd line_g(w.cap.size());
    for (int l = 0; l < w.cap.size(); ++l) line_g[l] = tau * (1.0 / u[l] - 1.0 / v[l]);
    g += w.eff * line_g;
    if (g.cwiseAbs().maxCoeff() < gtol) return q;

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nf, nf);
    for (int k = 0; k < nf; ++k)
      h(k, k) = tau * (1.0 / (a[k] * a[k]) + 1.0 / (b[k] * b[k]));
    for (int l = 0; l < w.cap.size(); ++l) {
      const double wgt = tau * (1.0 / (u[l] * u[l]) + 1.0 / (v[l] * v[l]));
      h.noalias() += wgt * w.eff.col(l) * w.eff.col(l).transpose();
    }
    Eigen::VectorXd dq = h.llt().solve(-g);

    // Fraction-to-boundary step cap, then Armijo backtracking.
    double alpha = 1.0;
    for (int k = 0; k < nf; ++k) {
      if (dq[k] < 0) alpha = std::min(alpha, 0.995 * a[k] / -dq[k]);
      if (dq[k] > 0) alpha = std::min(alpha, 0.995 * b[k] / dq[k]);
    }
    Eigen::VectorXd df = w.eff.transpose() * dq;
    for (int l = 0; l < w.cap.size(); ++l) {
      if (df[l] > 0) alpha = std::min(alpha, 0.995 * u[l] / df[l]);
      if (df[l] < 0) alpha = std::min(alpha, 0.995 * v[l] / -df[l]);
    }
    const double phi0 = barrier_value(w, tau, q);
    const double slope = g.dot(dq);
    bool stepped = false;
    for (int bt = 0; bt < 50; ++bt) {
      Eigen::VectorXd cand = q + alpha * dq;
      if (barrier_value(w, tau, cand) <= phi0 + 1e-4 * alpha * slope) {
        q = cand;
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!stepped) {
      if (g.cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, w.rho.cwiseAbs().maxCoeff()))
        return q;  // stalled at float precision next to a bound
      throw NonconvergenceError("interior-point clearing stalled off the central path");
    }
  }
  if (true) {
    // Loop exhausted: accept a near-central point, reject anything worse.
    Eigen::VectorXd a = q - w.qmin;
    Eigen::VectorXd f = w.eff.transpose() * q + w.fixed_flow;
    Eigen::VectorXd g = -w.rho;
    for (int k = 0; k < nf; ++k)
      g[k] += tau * (-1.0 / a[k] + 1.0 / (w.qcap[k] - q[k]));
    for (int l = 0; l < w.cap.size(); ++l)
      g += w.eff.col(l) * (tau * (1.0 / (w.cap[l] - f[l]) - 1.0 / (f[l] + w.cap[l])));
    if (g.cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, w.rho.cwiseAbs().maxCoeff())) return q;
  }
  throw NonconvergenceError("interior-point clearing failed to reach the central path");
}

// Joint objective at the tau-relaxed (central path) lower-level response.
double relaxed_joint_objective(const KktSystem& sys, const BidProfile& prof,
                               const BarrierWork& w, double tau, Eigen::VectorXd& warm) {
  warm = barrier_clear(w, tau, warm);
  double j = 0.0;
  for (size_t k = 0; k < w.free_ids.size(); ++k) {
    const int i = w.free_ids[k];
    j += offer_profit_term(sys.offers[i], warm[k], prof.bid[i]);
  }
  for (int i : w.fixed_ids)
    j += offer_profit_term(sys.offers[i], sys.offers[i].q_min, prof.bid[i]);
  return j;
}

}  // namespace

EquilibriumSolution solve_kkt(const KktSystem& sys, const BidProfile& initial,
                              const SolveOptions& opts) {
  BidProfile prof = initial;
  for (size_t i = 0; i < sys.offers.size(); ++i) {
    if (!prof.active[i]) continue;
    prof.bid[i] = clamp(prof.bid[i], sys.offers[i].band.lo, sys.offers[i].band.hi);
  }

  BarrierWork work = build_barrier_work(sys, prof);
  Eigen::VectorXd warm(work.free_ids.size());
  for (size_t k = 0; k < work.free_ids.size(); ++k) {
    const GameOffer& o = sys.offers[work.free_ids[k]];
    warm[k] = clamp(o.share, o.q_min, o.q_max);  // seed quantities at the share
  }

  std::vector<int> free_index(sys.offers.size(), -1);
  for (size_t k = 0; k < work.free_ids.size(); ++k) free_index[work.free_ids[k]] = k;

  // Relax-and-tighten schedule: coordinate ascent over bids against the
  // tau-relaxed market response, tighter stages refining less.
  int stage = 0;
  for (double tau = opts.tau_initial; tau >= opts.tau_final * 0.999;
       tau *= opts.tau_shrink, ++stage) {
    const int sweeps = stage < 2 ? 2 : (stage < 4 ? 1 : 0);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (size_t i = 0; i < sys.offers.size(); ++i) {
        if (!prof.active[i]) continue;
        const BidBand& band = sys.offers[i].band;
        if (band.hi - band.lo < 1e-12) continue;
        auto eval_bid = [&](double bid) {
          BidProfile cand = prof;
          cand.bid[i] = bid;
          BarrierWork wc = work;
          if (free_index[i] >= 0) wc.rho[free_index[i]] = bid;
          Eigen::VectorXd wm = warm;
          return relaxed_joint_objective(sys, cand, wc, tau, wm);
        };
        double best_bid = prof.bid[i];
        double best_val = eval_bid(best_bid);
        for (double cand : bid_grid(band, opts.grid_points)) {
          const double val = eval_bid(cand);
          if (val > best_val + 1e-12) {
            best_val = val;
            best_bid = cand;
          }
        }
        // Golden-section refinement around the incumbent.
        double span = (band.hi - band.lo) / std::max(1, opts.grid_points - 1);
        double lo = std::max(band.lo, best_bid - span);
        double hi = std::min(band.hi, best_bid + span);
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = eval_bid(x1), f2 = eval_bid(x2);
        for (int gs = 0; gs < 24; ++gs) {
          if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = eval_bid(x2);
          } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = eval_bid(x1);
          }
        }
        const double refined = 0.5 * (lo + hi);
        if (eval_bid(refined) > best_val + 1e-12) best_bid = refined;
        prof.bid[i] = best_bid;
        if (free_index[i] >= 0) work.rho[free_index[i]] = best_bid;
      }
    }
    // Track the central path at the new tau even when no sweeps run.
    if (!work.free_ids.empty()) warm = barrier_clear(work, tau, warm);
  }

  // tau -> 0 endpoint: exact lower level. One grid pass per bid against the
  // exact clearing snaps the solution onto the unrelaxed problem.
  for (size_t i = 0; i < sys.offers.size(); ++i) {
    if (!prof.active[i]) continue;
    const BidBand& band = sys.offers[i].band;
    double best_bid = prof.bid[i];
    double best_val = evaluate_profile(sys, prof).joint_objective;
    for (double cand : bid_grid(band, opts.grid_points)) {
      BidProfile trial = prof;
      trial.bid[i] = cand;
      const double val = evaluate_profile(sys, trial).joint_objective;
      if (val > best_val + 1e-12) {
        best_val = val;
        best_bid = cand;
      }
    }
    prof.bid[i] = best_bid;
  }

  EquilibriumSolution sol = evaluate_profile(sys, prof);
  sol.status = IterationStatus::converged;
  return sol;
}

BidProfile best_response(const KktSystem& sys, const BidProfile& current, int player,
                         const SolveOptions& opts, bool full_strategy) {
  BidProfile prof = current;

  for (size_t pa = 0; pa < sys.paths.size(); ++pa) {
    std::vector<int> own;
    for (FtrType t : {FtrType::obligation, FtrType::option}) {
      const int s = sys.slot(player, static_cast<int>(pa), t);
      if (s >= 0) own.push_back(s);
    }
    if (own.empty()) continue;

    int active = -1;
    for (int s : own)
      if (prof.active[s]) active = s;
    if (!full_strategy && active < 0) continue;

    auto player_profit_of = [&](const BidProfile& p) {
      ClearingOutcome out = clear_market(to_clearing_instance(sys, p));
      const std::vector<int> ids = active_slots(p);
      double total = 0.0;
      for (size_t k = 0; k < ids.size(); ++k)
        if (sys.offers[ids[k]].player == player)
          total += offer_profit_term(sys.offers[ids[k]], out.award[k], p.bid[ids[k]]);
      return total;
    };

    double best_val = player_profit_of(prof);
    BidProfile best = prof;

    auto consider = [&](const BidProfile& cand) {
      const double val = player_profit_of(cand);
      if (val > best_val + 1e-9) {
        best_val = val;
        best = cand;
      }
    };

    if (full_strategy && active >= 0) {
      BidProfile cand = prof;
      cand.active[active] = 0;  // withdraw from this path
      consider(cand);
    }
    const std::vector<int> slots_to_try = full_strategy ? own : std::vector<int>{active};
    for (int s : slots_to_try) {
      for (double bid : bid_grid(sys.offers[s].band, opts.grid_points)) {
        BidProfile cand = prof;
        for (int o : own) cand.active[o] = 0;
        cand.active[s] = 1;
        cand.bid[s] = bid;
        cand.q_cap[s] = sys.offers[s].q_max;
        consider(cand);
      }
    }
    prof = best;
  }
  return prof;
}

namespace {

std::string profile_key(const BidProfile& prof) {
  std::string key;
  char buf[64];
  for (size_t i = 0; i < prof.active.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%c%.9e:%.9e;", prof.active[i] ? 'a' : '-', prof.bid[i],
                  prof.q_cap[i]);
    key += buf;
  }
  return key;
}

}  // namespace

EquilibriumSolution iterate_sequential(const KktSystem& sys, const BidProfile& initial,
                                       const SolveOptions& opts, bool full_strategy) {
  BidProfile prof = initial;
  for (size_t i = 0; i < sys.offers.size(); ++i)
    if (prof.active[i])
      prof.bid[i] = clamp(prof.bid[i], sys.offers[i].band.lo, sys.offers[i].band.hi);

  std::unordered_set<std::string> seen;
  seen.insert(profile_key(prof));

  EquilibriumSolution best = evaluate_profile(sys, prof);
  bool simultaneous = opts.simultaneous;
  bool fell_back = false;
  IterationStatus status = IterationStatus::max_rounds;
  int rounds = 0;

  for (int round = 1; round <= opts.max_rounds; ++round) {
    rounds = round;
    BidProfile next = prof;
    if (simultaneous) {
      // Responses judged against a frozen snapshot, committed together.
      std::vector<std::future<BidProfile>> futures;
      for (int pl = 0; pl < sys.n_players; ++pl)
        futures.push_back(std::async(std::launch::async, [&, pl] {
          return best_response(sys, prof, pl, opts, full_strategy);
        }));
      for (int pl = 0; pl < sys.n_players; ++pl) {
        BidProfile resp = futures[pl].get();
        for (size_t i = 0; i < sys.offers.size(); ++i) {
          if (sys.offers[i].player != pl) continue;
          next.active[i] = resp.active[i];
          next.bid[i] = resp.bid[i];
          next.q_cap[i] = resp.q_cap[i];
        }
      }
    } else {
      for (int pl = 0; pl < sys.n_players; ++pl)
        next = best_response(sys, next, pl, opts, full_strategy);
    }

    bool type_changed = false;
    double delta = 0.0;
    for (size_t i = 0; i < sys.offers.size(); ++i) {
      if (next.active[i] != prof.active[i]) type_changed = true;
      if (next.active[i] && prof.active[i])
        delta = std::max(delta, std::abs(next.bid[i] - prof.bid[i]));
    }
    prof = next;

    EquilibriumSolution cur = evaluate_profile(sys, prof);
    if (cur.joint_objective > best.joint_objective) best = cur;

    if (!type_changed && delta < opts.epsilon) {
      status = IterationStatus::converged;
      best = cur;
      break;
    }
    if (!seen.insert(profile_key(prof)).second) {
      if (simultaneous && !fell_back) {
        // Simultaneous leapfrogging: restart the history in serial mode.
        simultaneous = false;
        fell_back = true;
        seen.clear();
        seen.insert(profile_key(prof));
      } else {
        status = IterationStatus::cycling;
        break;
      }
    }
  }

  best.status = status;
  best.rounds = rounds;
  return best;
}

NashReport verify_nash(const KktSystem& sys, const EquilibriumSolution& solution,
                       const SolveOptions& opts) {
  NashReport report;
  report.grid_points = opts.grid_points;
  report.epsilon = opts.epsilon;

  const Eigen::VectorXd base_profit =
      player_profits(sys, solution.profile, solution.point.award);

  auto scan_player = [&](int player) {
    NashReport local;
    auto player_profit_of = [&](const BidProfile& p) {
      ClearingOutcome out = clear_market(to_clearing_instance(sys, p));
      const std::vector<int> ids = active_slots(p);
      double total = 0.0;
      for (size_t k = 0; k < ids.size(); ++k)
        if (sys.offers[ids[k]].player == player)
          total += offer_profit_term(sys.offers[ids[k]], out.award[k], p.bid[ids[k]]);
      return total;
    };
    auto consider = [&](const BidProfile& cand, const NashDeviation& dev) {
      const double gain = player_profit_of(cand) - base_profit[player];
      ++local.deviations_checked;
      if (gain > local.max_improvement) {
        local.max_improvement = gain;
        local.best = dev;
        local.best.improvement = gain;
      }
    };

    for (size_t pa = 0; pa < sys.paths.size(); ++pa) {
      std::vector<int> own;
      for (FtrType t : {FtrType::obligation, FtrType::option}) {
        const int s = sys.slot(player, static_cast<int>(pa), t);
        if (s >= 0) own.push_back(s);
      }
      if (own.empty()) continue;

      int active = -1;
      for (int s : own)
        if (solution.profile.active[s]) active = s;

      if (active >= 0) {
        BidProfile cand = solution.profile;
        cand.active[active] = 0;
        NashDeviation dev;
        dev.player = player;
        dev.path = static_cast<int>(pa);
        dev.withdraw = true;
        consider(cand, dev);
      }
      for (int s : own) {
        const GameOffer& o = sys.offers[s];
        std::vector<double> qgrid;
        for (int k = 0; k < opts.grid_points; ++k)
          qgrid.push_back(o.q_min +
                          (o.q_max - o.q_min) * k / std::max(1, opts.grid_points - 1));
        for (double bid : bid_grid(o.band, opts.grid_points)) {
          for (double qc : qgrid) {
            BidProfile cand = solution.profile;
            for (int other : own) cand.active[other] = 0;
            cand.active[s] = 1;
            cand.bid[s] = bid;
            cand.q_cap[s] = qc;
            NashDeviation dev;
            dev.player = player;
            dev.path = static_cast<int>(pa);
            dev.type = o.type;
            dev.bid = bid;
            dev.q_cap = qc;
            consider(cand, dev);
          }
        }
      }
    }
    return local;
  };

  std::vector<std::future<NashReport>> futures;
  for (int pl = 0; pl < sys.n_players; ++pl)
    futures.push_back(std::async(std::launch::async, scan_player, pl));
  for (int pl = 0; pl < sys.n_players; ++pl) {
    NashReport local = futures[pl].get();
    report.deviations_checked += local.deviations_checked;
    if (local.max_improvement > report.max_improvement) {
      report.max_improvement = local.max_improvement;
      report.best = local.best;
    }
  }
  report.certified = report.max_improvement <= opts.epsilon;
  return report;
}

}  // namespace ftr

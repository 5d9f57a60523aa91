#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ftr/clearing.hpp"
#include "ftr/contribution.hpp"
#include "ftr/risk.hpp"

namespace ftr {

struct BidBand {
  double lo = 0.0;
  double hi = -1.0;
  bool valid() const { return lo <= hi + 1e-12; }
};

/// Path-level market data shared by every player.
struct PathMarketData {
  Path path;
  double zeta_f = 0.0;
  double zeta_r = 0.0;
  double spread = 0.0;
  BidBand obligation_band;  ///< [rho_base, (2 zf - 1) spread]; empty unless zf > zr
  BidBand option_band;      ///< [max(0, obligation cap), zf * spread]
};

/// One admissible (player, path, type) offer slot in the game.
struct GameOffer {
  int player = 0;  ///< 0-based player index
  int path = 0;    ///< 0-based path index
  FtrType type = FtrType::obligation;
  BidBand band;
  double q_min = 0.0;        ///< auction lower bound, clipped at zero
  double q_max = 0.0;        ///< p_share + FCP
  double ftr_min_raw = 0.0;  ///< p_share - |RCP| before clipping
  double share = 0.0;        ///< estimated share, used to seed quantities
  double plus_offset = 0.0;  ///< max(0, FCP - |RCP|)
  double minus_offset = 0.0; ///< min(0, FCP - |RCP|)
  double value_coeff = 0.0;  ///< (2 zf - 1) spread or zf * spread
};

/// Single-level game system: the joint objective data plus the embedded
/// ISO-clearing constraint structure for every admissible offer slot.
class KktSystem {
public:
  std::vector<PathMarketData> paths;
  int n_players = 0;
  std::vector<GameOffer> offers;
  Eigen::MatrixXd offer_impact;  ///< offers x lines, signed
  Eigen::VectorXd line_cap;
  std::vector<int> line_ids;


  /// Slot index for (player, path, type), or -1 when inadmissible.
  int slot(int player, int path, FtrType type) const;
};

/// Build the admissible offer slots from path metrics and per-(player, path)
/// contribution metrics. contrib[player][path] must align with `paths`.
/// Throws InconsistentBoundsError when a quantity interval is crossed.
KktSystem reduce_bilevel(const std::vector<PathMarketData>& path_data,
                         const std::vector<std::vector<ContributionMetrics>>& contrib,
                         const Eigen::MatrixXd& path_impact, const Eigen::VectorXd& line_cap,
                         const std::vector<int>& line_ids, double rho_obl_base = 0.0);

/// A strategy profile over the slots: which offers are submitted, at what
/// bid, and with what offered quantity cap.
struct BidProfile {
  std::vector<char> active;  ///< per slot
  Eigen::VectorXd bid;
  Eigen::VectorXd q_cap;
};

/// Profile with the given type activated per (player, path) where
/// admissible, bids at band midpoints, full quantity offered.
BidProfile uniform_type_profile(const KktSystem& sys, FtrType type);

/// Awards plus the embedded-problem multipliers at a bid profile.
struct KktPoint {
  Eigen::VectorXd award;        ///< per slot (zero on inactive)
  Eigen::VectorXd slack_upper;  ///< q_cap - award on active slots
  Eigen::VectorXd mu_plus;
  Eigen::VectorXd mu_minus;
  Eigen::VectorXd mu_line_up;
  Eigen::VectorXd mu_line_lo;
  Eigen::VectorXd line_flow;    ///< impact-weighted awards per line
};

struct KktResiduals {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double band = 0.0;
  double bounds = 0.0;
  double flow = 0.0;
  double worst() const;
};

enum class IterationStatus { converged, max_rounds, cycling };

struct EquilibriumSolution {
  BidProfile profile;
  KktPoint point;
  KktResiduals residuals;
  double joint_objective = 0.0;
  Eigen::VectorXd player_profit;  ///< own-bid accounting, per player
  IterationStatus status = IterationStatus::converged;
  int rounds = 0;
};

struct SolveOptions {
  double tau_initial = 1e-1;  ///< complementarity relaxation start
  double tau_final = 1e-8;
  double tau_shrink = 0.1;
  int grid_points = 10;       ///< bid/quantity grid resolution
  int max_rounds = 50;
  double epsilon = 1e-3;      ///< convergence and Nash tolerance
  bool simultaneous = true;   ///< frozen-snapshot rounds vs round-robin
};

/// Exact clearing instance for the active slots of a profile.
ClearingInstance to_clearing_instance(const KktSystem& sys, const BidProfile& profile);

/// Map a clearing outcome back onto the slot space.
KktPoint extract_point(const KktSystem& sys, const BidProfile& profile,
                       const ClearingOutcome& outcome);

KktResiduals compute_residuals(const KktSystem& sys, const BidProfile& profile,
                               const KktPoint& point);

/// Profit term of one offer: value * (q - plus_off) - bid * (q - minus_off).
double offer_profit_term(const GameOffer& offer, double award, double bid);

Eigen::VectorXd player_profits(const KktSystem& sys, const BidProfile& profile,
                               const Eigen::VectorXd& award);

double joint_objective_value(const KktSystem& sys, const BidProfile& profile,
                             const Eigen::VectorXd& award);

/// Evaluate a profile through an exact clearing solve.
EquilibriumSolution evaluate_profile(const KktSystem& sys, const BidProfile& profile);

/// Joint-objective maximization over bids on the KKT manifold: the
/// complementarity conditions are relaxed to central-path points at
/// parameter tau (an interior-point clearing solve), tau is tightened
/// geometrically, and the endpoint is polished with an exact clearing
/// solve so the returned multipliers satisfy the system to solver
/// precision. Types stay as activated in the initial profile.
EquilibriumSolution solve_kkt(const KktSystem& sys, const BidProfile& initial,
                              const SolveOptions& opts);

/// Best response of one player against a frozen profile: argmax of the
/// player's objective over the per-path candidate grid, clearing the market
/// exactly per candidate. With full_strategy the candidates include type
/// switches and withdrawing; otherwise only bids of the active slots move.
/// Ties keep the current decision.
BidProfile best_response(const KktSystem& sys, const BidProfile& current, int player,
                         const SolveOptions& opts, bool full_strategy);

/// Repeated best-response rounds until no player moves more than epsilon.
/// Simultaneous mode evaluates all players against a frozen snapshot and
/// commits at the round boundary; a detected cycle falls back to round-robin
/// once, then reports cycling with the best iterate seen.
EquilibriumSolution iterate_sequential(const KktSystem& sys, const BidProfile& initial,
                                       const SolveOptions& opts, bool full_strategy);

struct NashDeviation {
  int player = -1;
  int path = -1;
  FtrType type = FtrType::obligation;
  bool withdraw = false;
  double bid = 0.0;
  double q_cap = 0.0;
  double improvement = 0.0;
};

struct NashReport {
  double max_improvement = 0.0;
  NashDeviation best;
  long deviations_checked = 0;
  int grid_points = 0;
  double epsilon = 0.0;
  bool certified = false;
};

/// Independent certificate: grid search over unilateral deviations in
/// (type, bid, quantity cap, withdraw), re-clearing per deviation.
NashReport verify_nash(const KktSystem& sys, const EquilibriumSolution& solution,
                       const SolveOptions& opts);

}  // namespace ftr

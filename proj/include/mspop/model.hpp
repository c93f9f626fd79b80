#pragma once

#include "mspop/errors.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace mspop {

// Physiological state of one individual: size x1 plus m auxiliary structure
// coordinates (component ages that advance with time unless a custom
// velocity field is installed).
struct StateVector {
    double size = 0;
    std::vector<double> aux;
};

// Size classes.  The reproductive region is (x_M/2, x_M], the birth region
// (x_m, x_M/2]; both are left-open, right-closed.  Exactly x_m (or anything
// outside [x_m, x_M]) belongs to neither.
enum class Region { birth, reproductive, outside };

enum class DivisionKind { doubling, adder, smooth_hazard };

struct DivisionRule {
    DivisionKind kind = DivisionKind::doubling;
    double delta_l = 0; // adder: length gained between birth and division
};

enum class HazardKind { dirac, constant, table };

// Age profile of the division hazard.  `dirac` is symbolic: division is a
// deterministic event at a fixed age and the hazard has no pointwise rate.
// `constant` is a flat rate b0, `table` a piecewise-linear profile that is
// zero outside the sampled age range.  The hazard only acts while the
// individual is in the reproductive region.
struct HazardSpec {
    HazardKind kind = HazardKind::dirac;
    double a_star = 0; // dirac: explicit division age; 0 = derive from rule
    double b0 = 0;
    std::vector<double> ages;
    std::vector<double> rates;
};

enum class DaughterAux { halve, preserve };

struct ModelSpec {
    int m = 0;                     // auxiliary coordinate count
    double x_m = 0.5;              // minimum size
    double x_M = 2.0;              // maximum size
    double alpha = 0.69314718055994530942; // exponential growth rate
    double mu_d = 0.0;             // background death rate
    DivisionRule division{};
    HazardSpec hazard{};
    // Daughters get half of every coordinate by default; `preserve` keeps
    // the auxiliary coordinates of the mother instead.
    DaughterAux daughter_aux = DaughterAux::halve;
};

// Custom per-coordinate velocity, for models beyond the declarative
// exponential-size / unit-aux family.  `ddx` is the derivative in the
// field's own coordinate; if absent it is taken by central differences.
struct VelocityField {
    std::function<double(double age, const StateVector&)> v;
    std::function<double(double age, const StateVector&)> ddx;
};

// A validated, immutable model.  Construction goes through validate();
// everything downstream can assume the invariants hold.
class Model {
  public:
    static std::vector<std::string> check(const ModelSpec& spec);
    static Model validate(const ModelSpec& spec); // throws ValidationError

    const ModelSpec& spec() const { return spec_; }
    int m() const { return spec_.m; }
    int dim() const { return 1 + spec_.m; }
    double x_m() const { return spec_.x_m; }
    double x_M() const { return spec_.x_M; }
    double alpha() const { return spec_.alpha; }
    double mu_d() const { return spec_.mu_d; }

    // True when all velocities are the declarative closed forms
    // (exponential size, unit aux) and no custom field is installed.
    bool closed_form() const { return custom_.empty(); }

    // Division is a deterministic event (doubling, adder, explicit dirac).
    bool deterministic_division() const {
        return spec_.hazard.kind == HazardKind::dirac;
    }

    // Fixed division age, defined for doubling with exponential growth
    // (ln 2 / alpha) and for an explicit dirac age.  Throws otherwise;
    // the adder age depends on the birth size.
    double a_star() const;
    bool has_fixed_a_star() const { return a_star_ > 0; }

    Region region_of(const StateVector& x) const { return region_of_size(x.size); }
    Region region_of_size(double size) const;

    // Pointwise loss rate mu(age, state) = mu_d + beta1(age) * [reproductive].
    // Not defined for dirac hazards.
    double loss_rate(double age, const StateVector& x) const;

    // Age profile beta1 and its cumulative, for pointwise hazard kinds.
    double hazard_rate(double age) const;
    double hazard_cumulative(double age) const;
    double hazard_bound() const; // sup beta1, used for thinning

    // Supremum of the loss rate far along any trajectory; Laplace
    // transforms of the kernel only converge for lambda > -mu_infinity.
    double mu_infinity() const;

    StateVector daughter_state(const StateVector& mother) const;

    // Velocity access; i = 0 is size, 1..m the aux coordinates.
    double velocity(int i, double age, const StateVector& x) const;
    double velocity_ddx(int i, double age, const StateVector& x) const;
    double divergence(double age, const StateVector& x) const;

    // Install a custom velocity field (testing and verification models).
    void set_velocity(int i, VelocityField f);

    void check_state(const StateVector& x) const; // throws OutOfRange

  private:
    Model() = default;
    ModelSpec spec_;
    std::vector<std::pair<int, VelocityField>> custom_;
    std::vector<double> hazard_cum_; // table prefix integrals
    double a_star_ = 0;              // 0 = not fixed
};

} // namespace mspop

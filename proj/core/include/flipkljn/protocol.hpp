#pragma once

#include <cstdint>
#include <optional>

#include "flipkljn/noise.hpp"

// Two-party state machines for the classical and flip key-exchange schemes:
// bit/resistor mapping, per-detector peer decisions, the synchronized map
// flip, and the acceptance rules. One call to run_exchange advances a
// session by one bit period and yields a full ExchangeRecord.

namespace flipkljn {

enum class Role : std::uint8_t { Alice = 0, Bob = 1 };

// The two bit-mapping modes. Normal maps 0->L, 1->H; Flip reverses it.
enum class MapState : std::uint8_t { Normal = 0, Flip = 1 };

inline MapState opposite(MapState s) {
  return s == MapState::Normal ? MapState::Flip : MapState::Normal;
}

enum class DetectorKind : std::uint8_t { VoltageOnly, CurrentOnly, JVCD, Selective };

enum class Scheme : std::uint8_t { ClassicalKLJN, FlipKLJN };

// Normalized decision thresholds: (beta, kappa) in units of the lowest
// voltage level, (eta, xi) in units of the lowest current level. For ideal
// channels the feasible ordering is 1 < lower < 2α/(1+α) < upper < α; under
// measurement noise the same ordering holds against the noise-shifted
// effective levels.
struct ThresholdSet {
  double beta = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
  double xi = 0.0;
};

// Ordering check against an effective level triple (defaults to the ideal
// (1, 2α/(1+α), α) triple when constructed from the environment alone).
bool thresholds_feasible(double lower, double upper, const LevelTriple& levels);
void validate_thresholds(const ThresholdSet& t, const NoiseEnvironment& env);

Resistor map_bit_to_resistor(MapState state, int bit);
int map_resistor_to_bit(MapState state, Resistor resistor);

// Peer-resistor decision from the voltage estimate. Own L compares against
// beta·v_LL, own H against kappa·v_LL; an estimate below the threshold means
// the peer used L. Exact threshold ties resolve to the H branch.
Resistor decide_peer_resistor_voltage(Resistor own, double sigma2_v_hat,
                                      const NoiseEnvironment& env,
                                      const ThresholdSet& thresholds);

// Mirrored current-channel decision: current falls with resistance, so an
// estimate below the threshold means the peer used H. Own H compares against
// eta·i_HH, own L against xi·i_HH. Ties resolve to the L branch.
Resistor decide_peer_resistor_current(Resistor own, double sigma2_i_hat,
                                      const NoiseEnvironment& env,
                                      const ThresholdSet& thresholds);

// Joint voltage-current decision: empty optional = error flag raised
// (channel decisions disagree). A flag is a normal outcome, not an error.
std::optional<Resistor> jvcd_decide(Resistor own, double sigma2_v_hat,
                                    double sigma2_i_hat, const NoiseEnvironment& env,
                                    const ThresholdSet& thresholds);

// Channel-selecting decision: current channel when own resistor is L,
// voltage channel when own resistor is H.
Resistor selective_decide(Resistor own, double sigma2_v_hat, double sigma2_i_hat,
                          const NoiseEnvironment& env, const ThresholdSet& thresholds);

// Synchronized map flip. Alice flips on b_own/d_peer = 1/0, Bob on
// d_peer/b_own = 1/0. Discarded exchanges never flip.
MapState update_state(Role role, int b_own, int d_peer, bool accepted, MapState state);

// One party's live state within a session.
struct PartyState {
  Role role = Role::Alice;
  MapState state = MapState::Normal;
  int bit = 0;
  Resistor resistor = Resistor::L;
  std::optional<int> detected;
  bool flagged = false;
};

struct Session {
  PartyState alice;
  PartyState bob;

  static Session initial() {
    Session s;
    s.alice.role = Role::Alice;
    s.bob.role = Role::Bob;
    return s;
  }
};

enum class EstimateMode : std::uint8_t {
  Sampled, // estimates from generated wire samples
  Exact,   // estimates replaced by the exact level values (noiseless mode)
};

struct ProtocolConfig {
  Scheme scheme = Scheme::FlipKLJN;
  DetectorKind detector = DetectorKind::VoltageOnly;
  int samples = 100; // N per channel
  ThresholdSet thresholds;
  ChannelNoiseConfig channels;
  EstimateMode estimate_mode = EstimateMode::Sampled;
  // Behavioral sensitivity switch: when true, a flagged exchange still
  // drives the state update from the voltage-channel decision. Default off:
  // flagged exchanges are discarded by both parties and never flip.
  bool flip_on_flagged = false;
};

// Variance estimates as seen by one observer (NaN if the channel is unused).
struct ObserverEstimates {
  double sigma2_v = 0.0;
  double sigma2_i = 0.0;
};

struct ExchangeRecord {
  std::uint64_t index = 0;
  int b_a = 0, b_b = 0;
  MapState s_a_prev = MapState::Normal, s_b_prev = MapState::Normal;
  MapState s_a_next = MapState::Normal, s_b_next = MapState::Normal;
  Resistor resistor_a = Resistor::L, resistor_b = Resistor::L;
  ObserverEstimates est_alice, est_bob;
  // Decided peer resistors (valid when the matching flag is clear).
  Resistor decided_peer_a = Resistor::L, decided_peer_b = Resistor::L;
  int d_a = -1, d_b = -1; // -1 = undecided (flag raised)
  bool flag_a = false, flag_b = false;
  bool accepted = false;
  bool error_a = false; // Alice's reading of Bob wrong: d_b != b_b
  bool error_b = false; // Bob's reading of Alice wrong: d_a != b_a
};

// Classical acceptance: key bit kept only when the decided level is
// intermediate at both ends (each decision implies the peer used the
// opposite resistor).
bool classical_kljn_accept(const ExchangeRecord& record);

// Per-exchange derived streams. Pointers may be null when a purpose is
// unused (ideal channels need no per-observer measurement streams).
struct ExchangeStreams {
  GaussianStream* wire = nullptr;
  GaussianStream* alice_noise = nullptr;
  GaussianStream* bob_noise = nullptr;
  GaussianStream* eve_noise = nullptr;
};

// Optional eavesdropper tap: when present, run_exchange fills in the
// estimates Eve observes (the shared signal plus her own measurement noise).
struct EveTap {
  ObserverEstimates estimates;
};

// Advances the session by one exchange with freshly drawn random bits.
ExchangeRecord run_exchange(Session& session, const ProtocolConfig& config,
                            const NoiseEnvironment& env, Xoshiro256pp& bit_stream,
                            const ExchangeStreams& streams, EveTap* eve = nullptr,
                            std::uint64_t index = 0);

// Same engine with injected bits; used by tests and exhaustive sweeps.
ExchangeRecord run_exchange_with_bits(Session& session, const ProtocolConfig& config,
                                      const NoiseEnvironment& env, int bit_a, int bit_b,
                                      const ExchangeStreams& streams, EveTap* eve = nullptr,
                                      std::uint64_t index = 0);

}  // namespace flipkljn

#include "flipkljn/protocol.hpp"

#include <cmath>
#include <stdexcept>

namespace flipkljn {

bool thresholds_feasible(double lower, double upper, const LevelTriple& levels) {
  return levels.low < lower && lower < levels.mid && levels.mid < upper &&
         upper < levels.high;
}

void validate_thresholds(const ThresholdSet& t, const NoiseEnvironment& env) {
  const LevelTriple ideal{1.0, env.intermediate_ratio(), env.alpha};
  if (!thresholds_feasible(t.beta, t.kappa, ideal)) {
    throw std::invalid_argument("voltage thresholds violate 1 < beta < 2a/(1+a) < kappa < alpha");
  }
  if (!thresholds_feasible(t.eta, t.xi, ideal)) {
    throw std::invalid_argument("current thresholds violate 1 < eta < 2a/(1+a) < xi < alpha");
  }
}

Resistor map_bit_to_resistor(MapState state, int bit) {
  const bool high = (state == MapState::Normal) ? bit == 1 : bit == 0;
  return high ? Resistor::H : Resistor::L;
}

int map_resistor_to_bit(MapState state, Resistor resistor) {
  if (state == MapState::Normal) return resistor == Resistor::H ? 1 : 0;
  return resistor == Resistor::H ? 0 : 1;
}

Resistor decide_peer_resistor_voltage(Resistor own, double sigma2_v_hat,
                                      const NoiseEnvironment& env,
                                      const ThresholdSet& thresholds) {
  const double gamma = (own == Resistor::L ? thresholds.beta : thresholds.kappa) * env.v_ll;
  return sigma2_v_hat < gamma ? Resistor::L : Resistor::H;
}

Resistor decide_peer_resistor_current(Resistor own, double sigma2_i_hat,
                                      const NoiseEnvironment& env,
                                      const ThresholdSet& thresholds) {
  const double gamma = (own == Resistor::H ? thresholds.eta : thresholds.xi) * env.i_hh;
  return sigma2_i_hat < gamma ? Resistor::H : Resistor::L;
}

std::optional<Resistor> jvcd_decide(Resistor own, double sigma2_v_hat,
                                    double sigma2_i_hat, const NoiseEnvironment& env,
                                    const ThresholdSet& thresholds) {
  const Resistor by_voltage = decide_peer_resistor_voltage(own, sigma2_v_hat, env, thresholds);
  const Resistor by_current = decide_peer_resistor_current(own, sigma2_i_hat, env, thresholds);
  if (by_voltage == by_current) return by_voltage;
  return std::nullopt;
}

Resistor selective_decide(Resistor own, double sigma2_v_hat, double sigma2_i_hat,
                          const NoiseEnvironment& env, const ThresholdSet& thresholds) {
  if (own == Resistor::L) return decide_peer_resistor_current(own, sigma2_i_hat, env, thresholds);
  return decide_peer_resistor_voltage(own, sigma2_v_hat, env, thresholds);
}

MapState update_state(Role role, int b_own, int d_peer, bool accepted, MapState state) {
  if (!accepted) return state;
  const bool trigger = (role == Role::Alice) ? (b_own == 1 && d_peer == 0)
                                             : (d_peer == 1 && b_own == 0);
  return trigger ? opposite(state) : state;
}

bool classical_kljn_accept(const ExchangeRecord& record) {
  if (record.flag_a || record.flag_b) return false;
  return record.decided_peer_a != record.resistor_a &&
         record.decided_peer_b != record.resistor_b;
}

namespace {

struct ChannelEstimates {
  double alice = 0.0;
  double bob = 0.0;
  double eve = 0.0;
};

// Estimates one channel for all observers from a single pass over the wire
// samples. Ideal observers share the identical estimate; observers with
// measurement noise square their own noisy view of the same signal.
ChannelEstimates estimate_channel(double level, int n, bool noisy, double noise_var,
                                  const ExchangeStreams& streams, bool want_eve) {
  ChannelEstimates out;
  const double sd = std::sqrt(level);
  if (!noisy) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double x = sd * streams.wire->next();
      acc += x * x;
    }
    const double shared = acc / static_cast<double>(n);
    out.alice = out.bob = out.eve = shared;
    return out;
  }
  const double sd_n = std::sqrt(noise_var);
  double acc_a = 0.0, acc_b = 0.0, acc_e = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = sd * streams.wire->next();
    const double xa = x + sd_n * streams.alice_noise->next();
    const double xb = x + sd_n * streams.bob_noise->next();
    acc_a += xa * xa;
    acc_b += xb * xb;
    if (want_eve) {
      const double xe = x + sd_n * streams.eve_noise->next();
      acc_e += xe * xe;
    }
  }
  out.alice = acc_a / static_cast<double>(n);
  out.bob = acc_b / static_cast<double>(n);
  out.eve = want_eve ? acc_e / static_cast<double>(n) : 0.0;
  return out;
}

struct PartyDecision {
  Resistor peer = Resistor::L;
  bool flagged = false;
};

PartyDecision decide(DetectorKind detector, Resistor own, const ObserverEstimates& est,
                     const NoiseEnvironment& env, const ThresholdSet& thresholds) {
  PartyDecision out;
  switch (detector) {
    case DetectorKind::VoltageOnly:
      out.peer = decide_peer_resistor_voltage(own, est.sigma2_v, env, thresholds);
      break;
    case DetectorKind::CurrentOnly:
      out.peer = decide_peer_resistor_current(own, est.sigma2_i, env, thresholds);
      break;
    case DetectorKind::JVCD: {
      const auto joint = jvcd_decide(own, est.sigma2_v, est.sigma2_i, env, thresholds);
      if (joint) {
        out.peer = *joint;
      } else {
        out.flagged = true;
        // Channel decisions disagree; keep the voltage view for the optional
        // flip-on-flagged sensitivity mode.
        out.peer = decide_peer_resistor_voltage(own, est.sigma2_v, env, thresholds);
      }
      break;
    }
    case DetectorKind::Selective:
      out.peer = selective_decide(own, est.sigma2_v, est.sigma2_i, env, thresholds);
      break;
  }
  return out;
}

}  // namespace

ExchangeRecord run_exchange_with_bits(Session& session, const ProtocolConfig& config,
                                      const NoiseEnvironment& env, int bit_a, int bit_b,
                                      const ExchangeStreams& streams, EveTap* eve,
                                      std::uint64_t index) {
  ExchangeRecord rec;
  rec.index = index;
  rec.b_a = bit_a;
  rec.b_b = bit_b;
  rec.s_a_prev = session.alice.state;
  rec.s_b_prev = session.bob.state;

  session.alice.bit = bit_a;
  session.bob.bit = bit_b;
  session.alice.resistor = map_bit_to_resistor(session.alice.state, bit_a);
  session.bob.resistor = map_bit_to_resistor(session.bob.state, bit_b);
  rec.resistor_a = session.alice.resistor;
  rec.resistor_b = session.bob.resistor;
  const ResistorPair truth{rec.resistor_a, rec.resistor_b};

  const bool needs_current = config.detector != DetectorKind::VoltageOnly;
  const bool want_eve = eve != nullptr;

  if (config.estimate_mode == EstimateMode::Exact) {
    const double v = env.voltage_level(truth);
    const double i = env.current_level(truth);
    rec.est_alice = rec.est_bob = {v, i};
    if (eve) eve->estimates = {v, i};
  } else {
    const int n = config.samples;
    const bool v_noisy = config.channels.voltage_snr_db.has_value();
    const double v_noise =
        v_noisy ? measurement_noise_variance(env, Channel::Voltage,
                                             *config.channels.voltage_snr_db)
                : 0.0;
    const auto v_est = estimate_channel(env.voltage_level(truth), n, v_noisy, v_noise,
                                        streams, want_eve);
    rec.est_alice.sigma2_v = v_est.alice;
    rec.est_bob.sigma2_v = v_est.bob;
    double eve_v = v_est.eve, eve_i = 0.0;
    if (needs_current) {
      const bool i_noisy = config.channels.current_snr_db.has_value();
      const double i_noise =
          i_noisy ? measurement_noise_variance(env, Channel::Current,
                                               *config.channels.current_snr_db)
                  : 0.0;
      const auto i_est = estimate_channel(env.current_level(truth), n, i_noisy, i_noise,
                                          streams, want_eve);
      rec.est_alice.sigma2_i = i_est.alice;
      rec.est_bob.sigma2_i = i_est.bob;
      eve_i = i_est.eve;
    }
    if (eve) eve->estimates = {eve_v, eve_i};
  }

  const auto dec_a = decide(config.detector, session.alice.resistor, rec.est_alice, env,
                            config.thresholds);
  const auto dec_b = decide(config.detector, session.bob.resistor, rec.est_bob, env,
                            config.thresholds);
  rec.decided_peer_a = dec_a.peer;
  rec.decided_peer_b = dec_b.peer;
  rec.flag_a = dec_a.flagged;
  rec.flag_b = dec_b.flagged;
  session.alice.flagged = dec_a.flagged;
  session.bob.flagged = dec_b.flagged;

  // Each party maps the decided peer resistor to a bit through its OWN map
  // state; the parties switch states synchronously.
  const bool decided_a = !dec_a.flagged;
  const bool decided_b = !dec_b.flagged;
  rec.d_b = decided_a ? map_resistor_to_bit(session.alice.state, dec_a.peer) : -1;
  rec.d_a = decided_b ? map_resistor_to_bit(session.bob.state, dec_b.peer) : -1;
  session.alice.detected = decided_a ? std::optional<int>(rec.d_b) : std::nullopt;
  session.bob.detected = decided_b ? std::optional<int>(rec.d_a) : std::nullopt;

  const bool flag_free = !rec.flag_a && !rec.flag_b;
  if (config.scheme == Scheme::FlipKLJN) {
    rec.accepted = flag_free;
  } else {
    rec.accepted = classical_kljn_accept(rec);
  }

  rec.error_a = rec.d_b >= 0 && rec.d_b != rec.b_b;
  rec.error_b = rec.d_a >= 0 && rec.d_a != rec.b_a;

  if (config.scheme == Scheme::FlipKLJN) {
    int flip_d_b = rec.d_b;
    int flip_d_a = rec.d_a;
    bool flip_allowed = rec.accepted;
    if (config.flip_on_flagged && !flag_free) {
      flip_d_b = map_resistor_to_bit(session.alice.state, dec_a.peer);
      flip_d_a = map_resistor_to_bit(session.bob.state, dec_b.peer);
      flip_allowed = true;
    }
    rec.s_a_next = update_state(Role::Alice, bit_a, flip_d_b, flip_allowed, session.alice.state);
    rec.s_b_next = update_state(Role::Bob, bit_b, flip_d_a, flip_allowed, session.bob.state);
  } else {
    rec.s_a_next = session.alice.state;
    rec.s_b_next = session.bob.state;
  }
  session.alice.state = rec.s_a_next;
  session.bob.state = rec.s_b_next;
  return rec;
}

ExchangeRecord run_exchange(Session& session, const ProtocolConfig& config,
                            const NoiseEnvironment& env, Xoshiro256pp& bit_stream,
                            const ExchangeStreams& streams, EveTap* eve,
                            std::uint64_t index) {
  const std::uint64_t word = bit_stream.next();
  const int bit_a = static_cast<int>(word & 1u);
  const int bit_b = static_cast<int>((word >> 1) & 1u);
  return run_exchange_with_bits(session, config, env, bit_a, bit_b, streams, eve, index);
}

}  // namespace flipkljn

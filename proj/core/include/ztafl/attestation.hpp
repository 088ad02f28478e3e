#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ztafl/rng.hpp"

namespace ztafl {

using Digest32 = std::array<std::uint8_t, 32>;
using Nonce16 = std::array<std::uint8_t, 16>;
using Signature64 = std::array<std::uint8_t, 64>;
using PublicKey32 = std::array<std::uint8_t, 32>;
using SecretKey64 = std::array<std::uint8_t, 64>;

Digest32 sha256(std::span<const std::uint8_t> bytes);
Digest32 sha256(std::string_view text);

struct KeyPair {
    PublicKey32 pk{};
    SecretKey64 sk{};
};

// Ed25519 keypair from a 32-byte seed drawn off the given generator.
// Signatures are deterministic, which keeps byte logs replayable.
KeyPair make_keypair(Rng& rng);

Signature64 sign_detached(std::span<const std::uint8_t> msg, const SecretKey64& sk);
bool verify_detached(std::span<const std::uint8_t> msg, const Signature64& sig,
                     const PublicKey32& pk);

struct AgentIdentity {
    std::string agent_id;
    KeyPair keys;
    Digest32 pcr_state{};  // hash of the simulated firmware image
};

AgentIdentity make_identity(std::string agent_id, Rng& rng,
                            std::string_view firmware = "fw-1.0");

// Signed, nonce-bearing claim of identity and platform state. The canonical
// byte serialization is fixed: id_hash | timestamp (big-endian 64-bit) |
// pcr_digest | nonce, followed by the 64-byte signature on the wire.
struct AttestationToken {
    Digest32 id_hash{};
    std::int64_t timestamp_ms = 0;
    Digest32 pcr_digest{};
    Nonce16 nonce{};
    Signature64 signature{};

    std::array<std::uint8_t, 88> signed_payload() const;
    std::vector<std::uint8_t> serialize() const;
    static AttestationToken deserialize(std::span<const std::uint8_t> wire);

    bool operator==(const AttestationToken&) const = default;
};

inline constexpr std::size_t kTokenWireBytes = 152;
// The paper's token is additionally sealed to the fog key; confidentiality is
// modeled as envelope byte overhead only.
inline constexpr std::uint64_t kSealEnvelopeBytes = 48;

AttestationToken issue_token(const AgentIdentity& identity, std::int64_t now_ms,
                             Rng& nonce_rng);

enum class VerifyStatus {
    accept,
    unknown_identity,
    bad_signature,
    stale,
    replay,
    pcr_mismatch,
    low_trust,
    quarantined,
};

const char* to_string(VerifyStatus s);

enum class AgentState { active, quarantined };

struct TrustEntry {
    double tau = 0.7;
    AgentState state = AgentState::active;
    int consecutive_valid = 0;
};

// Per-agent reputation (tau in [0,1]) with the quarantine state machine.
class TrustDb {
public:
    explicit TrustDb(double tau_min = kTauMin) : tau_min_(tau_min) {}

    double tau_min() const { return tau_min_; }

    void register_agent(const std::string& agent_id, double tau = 0.7);
    bool contains(const std::string& agent_id) const;
    const TrustEntry& entry(const std::string& agent_id) const;

    // +0.02 up to 1.0 when the agent scored above the cohort mean. Returns
    // false (no-op) for quarantined agents.
    bool update_success(const std::string& agent_id, bool above_average);

    // Halves tau; dropping below 0.6 moves the agent to quarantine.
    // Quarantined agents still halve (tau remains a complete record).
    TrustEntry penalize(const std::string& agent_id);

    // One quarantine attestation outcome; 5 consecutive valid ones rejoin
    // the agent at tau = 0.65. Throws InvalidStateError on active agents.
    AgentState quarantine_step(const std::string& agent_id, bool attestation_valid);

    const std::map<std::string, TrustEntry>& entries() const { return entries_; }

    static constexpr double kTauMin = 0.6;
    static constexpr double kRejoinTau = 0.65;
    static constexpr int kRejoinStreak = 5;

private:
    TrustEntry& require(const std::string& agent_id);
    double tau_min_ = kTauMin;
    std::map<std::string, TrustEntry> entries_;
};

struct FirmwareManifest {
    std::string agent_id;
    Digest32 new_pcr{};
    Signature64 manufacturer_sig{};
};

// Fog-side verifier state: registered keys, PCR references, and the
// seen-nonce cache (retention 2 * dt_max).
class ReferenceRegistry {
public:
    explicit ReferenceRegistry(PublicKey32 manufacturer_key)
        : manufacturer_key_(manufacturer_key) {}

    void register_agent(const AgentIdentity& identity);
    bool knows(const Digest32& id_hash) const;
    std::optional<std::string> agent_id_for(const Digest32& id_hash) const;

    // Full verification pipeline in fixed order: identity, signature,
    // freshness, nonce, PCR, trust. The first failing check is reported.
    VerifyStatus verify_token(const AttestationToken& token, const TrustDb& trustdb,
                              std::int64_t now_ms, std::int64_t dt_max_ms = 60'000);

    // Token validity without the trust gate; what a quarantined agent must
    // pass 5 times in a row to rejoin.
    bool attestation_valid(const AttestationToken& token, std::int64_t now_ms,
                           std::int64_t dt_max_ms = 60'000);

    // Replaces PCR_ref iff the manufacturer signature over
    // (agent_id | new_pcr) verifies.
    bool register_firmware_update(const FirmwareManifest& manifest);

    // id_hash | new_pcr, the bytes the manufacturer signs.
    static std::array<std::uint8_t, 64> manifest_payload(const std::string& agent_id,
                                                         const Digest32& new_pcr);

private:
    struct AgentRecord {
        std::string agent_id;
        PublicKey32 pk{};
        Digest32 pcr_ref{};
    };

    VerifyStatus check_token(const AttestationToken& token, std::int64_t now_ms,
                             std::int64_t dt_max_ms, bool record_nonce);
    void prune_nonces(std::int64_t now_ms);

    PublicKey32 manufacturer_key_;
    std::map<Digest32, AgentRecord> agents_;
    std::map<Nonce16, std::int64_t> seen_nonces_;  // nonce -> expiry
};

}  // namespace ztafl

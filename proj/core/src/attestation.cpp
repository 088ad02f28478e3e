#include "ztafl/attestation.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "ztafl/errors.hpp"

namespace ztafl {

namespace {

void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

void put_be64(std::uint8_t* out, std::int64_t value) {
    const auto u = static_cast<std::uint64_t>(value);
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(u >> (56 - 8 * i));
}

std::int64_t get_be64(const std::uint8_t* in) {
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u = (u << 8) | in[i];
    return static_cast<std::int64_t>(u);
}

}  // namespace

Digest32 sha256(std::span<const std::uint8_t> bytes) {
    ensure_sodium();
    Digest32 out;
    crypto_hash_sha256(out.data(), bytes.data(), bytes.size());
    return out;
}

Digest32 sha256(std::string_view text) {
    return sha256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

KeyPair make_keypair(Rng& rng) {
    ensure_sodium();
    std::array<std::uint8_t, 32> seed;
    for (auto& b : seed) b = static_cast<std::uint8_t>(rng.uniform_u64(256));
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
    return kp;
}

Signature64 sign_detached(std::span<const std::uint8_t> msg, const SecretKey64& sk) {
    ensure_sodium();
    Signature64 sig;
    crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), sk.data());
    return sig;
}

bool verify_detached(std::span<const std::uint8_t> msg, const Signature64& sig,
                     const PublicKey32& pk) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

AgentIdentity make_identity(std::string agent_id, Rng& rng, std::string_view firmware) {
    AgentIdentity id;
    id.agent_id = std::move(agent_id);
    id.keys = make_keypair(rng);
    id.pcr_state = sha256(std::string(firmware) + ":" + id.agent_id);
    return id;
}

std::array<std::uint8_t, 88> AttestationToken::signed_payload() const {
    std::array<std::uint8_t, 88> out;
    std::memcpy(out.data(), id_hash.data(), 32);
    put_be64(out.data() + 32, timestamp_ms);
    std::memcpy(out.data() + 40, pcr_digest.data(), 32);
    std::memcpy(out.data() + 72, nonce.data(), 16);
    return out;
}

std::vector<std::uint8_t> AttestationToken::serialize() const {
    std::vector<std::uint8_t> out(kTokenWireBytes);
    const auto payload = signed_payload();
    std::memcpy(out.data(), payload.data(), payload.size());
    std::memcpy(out.data() + payload.size(), signature.data(), 64);
    return out;
}

AttestationToken AttestationToken::deserialize(std::span<const std::uint8_t> wire) {
    if (wire.size() != kTokenWireBytes)
        throw InvalidInputError("token: wrong wire size");
    AttestationToken t;
    std::memcpy(t.id_hash.data(), wire.data(), 32);
    t.timestamp_ms = get_be64(wire.data() + 32);
    std::memcpy(t.pcr_digest.data(), wire.data() + 40, 32);
    std::memcpy(t.nonce.data(), wire.data() + 72, 16);
    std::memcpy(t.signature.data(), wire.data() + 88, 64);
    return t;
}

AttestationToken issue_token(const AgentIdentity& identity, std::int64_t now_ms,
                             Rng& nonce_rng) {
    AttestationToken t;
    t.id_hash = sha256(identity.agent_id);
    t.timestamp_ms = now_ms;
    t.pcr_digest = identity.pcr_state;
    for (auto& b : t.nonce) b = static_cast<std::uint8_t>(nonce_rng.uniform_u64(256));
    const auto payload = t.signed_payload();
    t.signature = sign_detached(payload, identity.keys.sk);
    return t;
}

const char* to_string(VerifyStatus s) {
    switch (s) {
        case VerifyStatus::accept: return "accept";
        case VerifyStatus::unknown_identity: return "unknown-identity";
        case VerifyStatus::bad_signature: return "bad-signature";
        case VerifyStatus::stale: return "stale";
        case VerifyStatus::replay: return "replay";
        case VerifyStatus::pcr_mismatch: return "pcr-mismatch";
        case VerifyStatus::low_trust: return "low-trust";
        case VerifyStatus::quarantined: return "quarantined";
    }
    return "unknown";
}

void TrustDb::register_agent(const std::string& agent_id, double tau) {
    entries_[agent_id] = TrustEntry{tau, AgentState::active, 0};
}

bool TrustDb::contains(const std::string& agent_id) const {
    return entries_.count(agent_id) != 0;
}

const TrustEntry& TrustDb::entry(const std::string& agent_id) const {
    auto it = entries_.find(agent_id);
    if (it == entries_.end()) throw InvalidInputError("trustdb: unknown agent " + agent_id);
    return it->second;
}

TrustEntry& TrustDb::require(const std::string& agent_id) {
    auto it = entries_.find(agent_id);
    if (it == entries_.end()) throw InvalidInputError("trustdb: unknown agent " + agent_id);
    return it->second;
}

bool TrustDb::update_success(const std::string& agent_id, bool above_average) {
    TrustEntry& e = require(agent_id);
    if (e.state == AgentState::quarantined) return false;
    if (above_average) e.tau = std::min(1.0, e.tau + 0.02);
    return true;
}

TrustEntry TrustDb::penalize(const std::string& agent_id) {
    TrustEntry& e = require(agent_id);
    e.tau *= 0.5;
    if (e.tau < tau_min_ && e.state == AgentState::active) {
        e.state = AgentState::quarantined;
        e.consecutive_valid = 0;
    }
    return e;
}

AgentState TrustDb::quarantine_step(const std::string& agent_id, bool attestation_valid) {
    TrustEntry& e = require(agent_id);
    if (e.state != AgentState::quarantined)
        throw InvalidStateError("quarantine_step: agent is active");
    if (!attestation_valid) {
        e.consecutive_valid = 0;
        return e.state;
    }
    e.consecutive_valid += 1;
    if (e.consecutive_valid >= kRejoinStreak) {
        e.state = AgentState::active;
        e.tau = kRejoinTau;
        e.consecutive_valid = 0;
    }
    return e.state;
}

void ReferenceRegistry::register_agent(const AgentIdentity& identity) {
    AgentRecord rec;
    rec.agent_id = identity.agent_id;
    rec.pk = identity.keys.pk;
    rec.pcr_ref = identity.pcr_state;
    agents_[sha256(identity.agent_id)] = std::move(rec);
}

bool ReferenceRegistry::knows(const Digest32& id_hash) const {
    return agents_.count(id_hash) != 0;
}

std::optional<std::string> ReferenceRegistry::agent_id_for(const Digest32& id_hash) const {
    auto it = agents_.find(id_hash);
    if (it == agents_.end()) return std::nullopt;
    return it->second.agent_id;
}

void ReferenceRegistry::prune_nonces(std::int64_t now_ms) {
    for (auto it = seen_nonces_.begin(); it != seen_nonces_.end();) {
        if (it->second < now_ms)
            it = seen_nonces_.erase(it);
        else
            ++it;
    }
}

VerifyStatus ReferenceRegistry::check_token(const AttestationToken& token, std::int64_t now_ms,
                                            std::int64_t dt_max_ms, bool record_nonce) {
    auto it = agents_.find(token.id_hash);
    if (it == agents_.end()) return VerifyStatus::unknown_identity;
    const AgentRecord& rec = it->second;

    const auto payload = token.signed_payload();
    if (!verify_detached(payload, token.signature, rec.pk)) return VerifyStatus::bad_signature;

    const std::int64_t age = now_ms - token.timestamp_ms;
    if (age > dt_max_ms || age < -dt_max_ms) return VerifyStatus::stale;

    prune_nonces(now_ms);
    if (seen_nonces_.count(token.nonce) != 0) return VerifyStatus::replay;
    if (record_nonce) seen_nonces_[token.nonce] = now_ms + 2 * dt_max_ms;

    if (token.pcr_digest != rec.pcr_ref) return VerifyStatus::pcr_mismatch;
    return VerifyStatus::accept;
}

VerifyStatus ReferenceRegistry::verify_token(const AttestationToken& token,
                                             const TrustDb& trustdb, std::int64_t now_ms,
                                             std::int64_t dt_max_ms) {
    const VerifyStatus base = check_token(token, now_ms, dt_max_ms, /*record_nonce=*/true);
    if (base != VerifyStatus::accept) return base;
    const auto& agent_id = agents_.at(token.id_hash).agent_id;
    if (!trustdb.contains(agent_id)) return VerifyStatus::unknown_identity;
    const TrustEntry& e = trustdb.entry(agent_id);
    if (e.state == AgentState::quarantined) return VerifyStatus::quarantined;
    if (e.tau < trustdb.tau_min()) return VerifyStatus::low_trust;
    return VerifyStatus::accept;
}

bool ReferenceRegistry::attestation_valid(const AttestationToken& token, std::int64_t now_ms,
                                          std::int64_t dt_max_ms) {
    return check_token(token, now_ms, dt_max_ms, /*record_nonce=*/true) == VerifyStatus::accept;
}

std::array<std::uint8_t, 64> ReferenceRegistry::manifest_payload(const std::string& agent_id,
                                                                 const Digest32& new_pcr) {
    std::array<std::uint8_t, 64> payload;
    const Digest32 idh = sha256(agent_id);
    std::memcpy(payload.data(), idh.data(), 32);
    std::memcpy(payload.data() + 32, new_pcr.data(), 32);
    return payload;
}

bool ReferenceRegistry::register_firmware_update(const FirmwareManifest& manifest) {
    const auto payload = manifest_payload(manifest.agent_id, manifest.new_pcr);
    if (!verify_detached(payload, manifest.manufacturer_sig, manufacturer_key_)) return false;
    const Digest32 idh = sha256(manifest.agent_id);
    auto it = agents_.find(idh);
    if (it == agents_.end()) return false;
    it->second.pcr_ref = manifest.new_pcr;
    return true;
}

}  // namespace ztafl

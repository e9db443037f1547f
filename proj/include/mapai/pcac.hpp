#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mapai/core.hpp"
#include "mapai/gate.hpp"

namespace mapai::pcac {

struct CandidateEntry {
    std::string id;
    MetricVector metrics;
};

// Canonical byte serialization of a governance spec: fixed field order,
// hard constraints sorted by (metric, comparator, threshold), numbers as
// shortest round-trip decimals. Equal specs produce equal bytes.
std::string canonical_bytes(const GovernanceSpec& governance);

// SHA-256 of canonical_bytes, 64 lowercase hex characters.
std::string gov_hash(const GovernanceSpec& governance);

// Admissible set in canonical (ascending id) order.
std::vector<CandidateEntry> hard_filter(const std::vector<CandidateEntry>& candidates,
                                        const GovernanceSpec& governance);

struct FrontierResult {
    std::vector<CandidateEntry> frontier;
    std::vector<DominanceWitness> witnesses;  // one per removed candidate
};

// Pareto non-domination over the oriented criteria: a dominates b when it is
// weakly better everywhere and strictly better somewhere.
FrontierResult dominance_frontier(const std::vector<CandidateEntry>& admissible,
                                  const std::vector<Criterion>& criteria_order);

// Lexicographic selection over criteria_order; exact ties fall through to
// ascending candidate id. Throws on an empty frontier.
std::string select(const std::vector<CandidateEntry>& frontier,
                   const std::vector<Criterion>& criteria_order, TieRule tie_rule);

struct CompilationResult {
    Decision decision;
    Certificate certificate;
};

// The full compile pipeline: canonicalize and hash governance, filter, prune
// to the frontier, select, and emit the replayable certificate. Candidate
// input order never affects the output; identical inputs produce
// byte-identical certificates.
CompilationResult compile(const std::vector<CandidateEntry>& candidates,
                          const GovernanceSpec& governance,
                          const std::optional<std::string>& escalation_policy_id);

// Canonical certificate serialization (and its hash-stable parse inverse).
std::string certificate_bytes(const Certificate& certificate);
Certificate parse_certificate(const std::string& bytes);

// Replays compilation and compares certificates byte-for-byte. Mismatch or
// any replay failure returns false; never throws.
bool verify(const Certificate& certificate,
            const std::vector<CandidateEntry>& candidates,
            const GovernanceSpec& governance,
            const std::optional<std::string>& escalation_policy_id);

// Same check against an already-serialized certificate (e.g. file contents),
// so any single tampered byte is detected.
bool verify_bytes(const std::string& bytes,
                  const std::vector<CandidateEntry>& candidates,
                  const GovernanceSpec& governance,
                  const std::optional<std::string>& escalation_policy_id);

}  // namespace mapai::pcac

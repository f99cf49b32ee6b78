#pragma once

#include "llmeval/gateway.hpp"

#include <memory>
#include <string>

namespace llmeval::fixture {

/// Deterministic stand-in for the model: reads the rendered prompt and answers the way a
/// careful annotator would for the synthetic corpus.
std::string reply(const std::string& prompt);

std::shared_ptr<Backend> backend();

/// Repository paths of the shared fixtures.
std::string data_dir();
std::string corpus_dir();

}  // namespace llmeval::fixture

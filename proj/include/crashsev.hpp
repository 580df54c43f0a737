#pragma once

#include "crashsev/assets.hpp"
#include "crashsev/crash_data.hpp"
#include "crashsev/http_backend.hpp"
#include "crashsev/label_extraction.hpp"
#include "crashsev/llm_client.hpp"
#include "crashsev/metrics.hpp"
#include "crashsev/mock_backend.hpp"
#include "crashsev/narrative.hpp"
#include "crashsev/prompting.hpp"
#include "crashsev/reasoning_analysis.hpp"
#include "crashsev/runner.hpp"
#include "crashsev/synthetic.hpp"

#pragma once

#include <metricwise/error.hpp>
#include <metricwise/rng.hpp>
#include <metricwise/metric_core.hpp>
#include <metricwise/importance.hpp>
#include <metricwise/bernoulli.hpp>
#include <metricwise/confidence.hpp>
#include <metricwise/report.hpp>
#include <metricwise/multilabel.hpp>
#include <metricwise/online_bs.hpp>
#include <metricwise/harness.hpp>

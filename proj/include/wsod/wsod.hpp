#pragma once

#include "wsod/al_policies.hpp"
#include "wsod/csv.hpp"
#include "wsod/data.hpp"
#include "wsod/dataset_io.hpp"
#include "wsod/detector.hpp"
#include "wsod/errors.hpp"
#include "wsod/experiment.hpp"
#include "wsod/geometry.hpp"
#include "wsod/harness.hpp"
#include "wsod/model_io.hpp"
#include "wsod/pipeline.hpp"
#include "wsod/random.hpp"
#include "wsod/scoring.hpp"
#include "wsod/ssl_policies.hpp"
#include "wsod/voc_eval.hpp"

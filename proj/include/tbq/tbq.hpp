#pragma once

// Everything at once.
#include "tbq/acquisition.hpp"
#include "tbq/analysis.hpp"
#include "tbq/bitstream.hpp"
#include "tbq/entropy.hpp"
#include "tbq/errors.hpp"
#include "tbq/pipeline.hpp"
#include "tbq/postselect.hpp"
#include "tbq/randtests.hpp"
#include "tbq/report.hpp"
#include "tbq/run_config.hpp"
#include "tbq/toeplitz.hpp"
#include "tbq/twinbeam.hpp"

#include "support/fixture_topic.hpp"

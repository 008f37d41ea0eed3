# Service layer module
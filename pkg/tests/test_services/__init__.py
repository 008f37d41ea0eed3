# Service tests module
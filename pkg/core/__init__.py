# Scenario pipeline

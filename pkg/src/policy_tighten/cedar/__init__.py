"""Cedar-subset model: schema, entities, policies, type checking and evaluation."""

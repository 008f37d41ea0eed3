# Polyglot SRL Toolkit

namespace permaloc {}

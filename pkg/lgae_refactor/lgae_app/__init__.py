
'''Linear graph auto-encoders for link prediction.'''
